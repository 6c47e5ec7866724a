#include "outact/binary_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "outact/error.hpp"

namespace outact {

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), sizeof(T))) {
    throw ContractError("binary stream truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return std::bit_cast<T>(bytes);
}

void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw ContractError(std::string("bad magic, expected ") + magic);
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw ContractError("unsupported format version " + std::to_string(version));
  }
}

std::uint32_t narrow(std::size_t v) {
  if (v > 0xffffffffu) throw ContractError("dimension exceeds u32");
  return static_cast<std::uint32_t>(v);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

void write_classifier(std::ostream& out, const PixelClassifier& net) {
  put_magic(out, "ACTS");
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, narrow(net.layers.size()));
  for (const Layer& l : net.layers) {
    put<std::uint32_t>(out, narrow(static_cast<std::size_t>(l.weights.rows())));
    put<std::uint32_t>(out, narrow(static_cast<std::size_t>(l.weights.cols())));
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) put<double>(out, l.weights.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) put<double>(out, l.bias[i]);
  }
}

PixelClassifier read_classifier(std::istream& in) {
  expect_magic(in, "ACTS");
  const auto count = get<std::uint32_t>(in);
  PixelClassifier net;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    Layer l{Matrix(rows, cols), Vector(rows)};
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = get<double>(in);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = get<double>(in);
    if (!net.layers.empty() && net.layers.back().weights.rows() != l.weights.cols()) {
      throw ContractError("classifier layers do not chain");
    }
    net.layers.push_back(std::move(l));
  }
  if (net.layers.empty() || net.layers.back().weights.rows() != 1) {
    throw ContractError("classifier must end in a single output");
  }
  return net;
}

void save_classifier(const std::filesystem::path& path, const PixelClassifier& net) {
  auto out = open_out(path);
  write_classifier(out, net);
}

PixelClassifier load_classifier(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_classifier(in);
}

void write_samples(std::ostream& out, const std::vector<Sample>& samples) {
  const std::size_t pixels = samples.empty() ? 0 : samples.front().pixels();
  const std::size_t dim =
      samples.empty() ? 0 : static_cast<std::size_t>(samples.front().features.cols());
  put_magic(out, "ACTD");
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, narrow(samples.size()));
  put<std::uint32_t>(out, narrow(pixels));
  put<std::uint32_t>(out, narrow(dim));
  for (const Sample& s : samples) {
    if (s.pixels() != pixels || static_cast<std::size_t>(s.features.cols()) != dim) {
      throw ContractError("write_samples: samples differ in shape");
    }
    for (Eigen::Index i = 0; i < s.features.size(); ++i) put<double>(out, s.features.data()[i]);
    for (std::uint8_t m : s.mask) put<std::uint8_t>(out, m);
  }
}

std::vector<Sample> read_samples(std::istream& in) {
  expect_magic(in, "ACTD");
  const auto count = get<std::uint32_t>(in);
  const auto pixels = get<std::uint32_t>(in);
  const auto dim = get<std::uint32_t>(in);
  std::vector<Sample> samples(count);
  for (Sample& s : samples) {
    s.features.resize(pixels, dim);
    for (Eigen::Index i = 0; i < s.features.size(); ++i) s.features.data()[i] = get<double>(in);
    s.mask.resize(pixels);
    std::size_t fg = 0;
    for (std::uint8_t& m : s.mask) {
      m = get<std::uint8_t>(in);
      if (m > 1) throw ContractError("mask entry outside {0, 1}");
      fg += m;
    }
    s.foreground_fraction = pixels ? static_cast<double>(fg) / pixels : 0.0;
  }
  return samples;
}

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  auto out = open_out(path);
  write_samples(out, samples);
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_samples(in);
}

std::vector<double> load_f64_array(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto size = std::filesystem::file_size(path);
  if (size % 8 != 0) throw ContractError(path.string() + ": size is not a multiple of 8");
  std::vector<double> values(size / 8);
  for (double& v : values) v = get<double>(in);
  return values;
}

void save_f64_array(const std::filesystem::path& path, const std::vector<double>& values) {
  auto out = open_out(path);
  for (double v : values) put<double>(out, v);
}

std::vector<double> load_csv_array(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    }
    std::istringstream fields(line);
    std::string tok;
    std::vector<double> row;
    bool numeric = true;
    while (fields >> tok) {
      std::size_t used = 0;
      try {
        row.push_back(std::stod(tok, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
      if (used != tok.size()) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ContractError(path.string() + ": non-numeric field '" + tok + "'");
    }
    if (!row.empty()) first = false;
    values.insert(values.end(), row.begin(), row.end());
  }
  return values;
}

std::string file_checksum(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace outact
