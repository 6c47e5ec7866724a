#include "outact/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "outact/error.hpp"

namespace outact {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ContractError("config key '" + std::string(key) + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) {
      throw ContractError("config line " + std::to_string(lineno) + ": empty key");
    }
    kv.set(std::move(key), trim(std::string_view(body).substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse(in);
}

bool KeyValues::has(std::string_view key) const { return find(key) != nullptr; }

void KeyValues::set(std::string key, std::string value) {
  entries_[std::move(key)] = std::move(value);
}

const std::string* KeyValues::find(std::string_view key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string KeyValues::get_string(std::string_view key, std::string fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used == v->size()) return d;
  } catch (const std::exception&) {
  }
  throw ContractError("config key '" + std::string(key) + "': cannot parse '" + *v + "'");
}

std::size_t KeyValues::get_size(std::string_view key, std::size_t fallback) const {
  const std::string* v = find(key);
  return v ? parse_number<std::size_t>(key, *v) : fallback;
}

std::uint64_t KeyValues::get_u64(std::string_view key, std::uint64_t fallback) const {
  const std::string* v = find(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

std::vector<std::string> KeyValues::get_list(std::string_view key,
                                             std::vector<std::string> fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  std::string_view rest = *v;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<std::size_t> KeyValues::get_size_list(std::string_view key,
                                                  std::vector<std::size_t> fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  for (const std::string& item : get_list(key, {})) {
    out.push_back(parse_number<std::size_t>(key, item));
  }
  return out;
}

void KeyValues::require_known(const std::vector<std::string_view>& known) const {
  for (const auto& [key, value] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ContractError("unknown config key '" + key + "'");
    }
  }
}

}  // namespace outact
