#include "outact/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "outact/binary_io.hpp"
#include "outact/error.hpp"

namespace outact {

namespace {

struct Disk {
  double cx;
  double cy;
  double r;
};

bool inside(const Disk& d, double x, double y) {
  const double dx = x - d.cx;
  const double dy = y - d.cy;
  return dx * dx + dy * dy <= d.r * d.r;
}

Disk place_disk(std::mt19937_64& rng, double side, double r) {
  // Keep the whole disk on the canvas.
  std::uniform_real_distribution<double> pos(r, side - 1.0 - r);
  const double cx = pos(rng);
  const double cy = pos(rng);
  return {cx, cy, r};
}

// Draws one mask; returns false when the geometry is degenerate.
bool draw_mask(std::mt19937_64& rng, Shape shape, std::size_t side,
               std::vector<std::uint8_t>& mask) {
  const double s = static_cast<double>(side);
  const double scale = s / 32.0;
  mask.assign(side * side, 0);

  std::vector<Disk> fill;
  std::vector<Disk> hole;
  switch (shape) {
    case Shape::Disk: {
      const double r = std::uniform_real_distribution<double>(4.0, 10.0)(rng) * scale;
      if (r < 1.0 || 2.0 * r >= s - 1.0) return false;
      fill.push_back(place_disk(rng, s, r));
      break;
    }
    case Shape::Annulus: {
      const double r = std::uniform_real_distribution<double>(6.0, 12.0)(rng) * scale;
      const double inner = r * std::uniform_real_distribution<double>(0.4, 0.6)(rng);
      if (inner < 1.0 || r - inner < 1.0 || 2.0 * r >= s - 1.0) return false;
      const Disk outer = place_disk(rng, s, r);
      fill.push_back(outer);
      hole.push_back({outer.cx, outer.cy, inner});
      break;
    }
    case Shape::TwoBlobs: {
      std::uniform_real_distribution<double> radius(3.0, 6.0);
      for (int k = 0; k < 2; ++k) {
        const double r = radius(rng) * scale;
        if (r < 1.0 || 2.0 * r >= s - 1.0) return false;
        fill.push_back(place_disk(rng, s, r));
      }
      break;
    }
  }

  std::size_t fg = 0;
  for (std::size_t row = 0; row < side; ++row) {
    for (std::size_t col = 0; col < side; ++col) {
      const double x = static_cast<double>(col);
      const double y = static_cast<double>(row);
      bool on = std::any_of(fill.begin(), fill.end(), [&](const Disk& d) { return inside(d, x, y); });
      if (on && std::any_of(hole.begin(), hole.end(), [&](const Disk& d) { return inside(d, x, y); })) {
        on = false;
      }
      mask[row * side + col] = on ? 1 : 0;
      fg += on ? 1 : 0;
    }
  }
  return fg > 0 && fg < mask.size();
}

}  // namespace

std::string_view to_string(Shape s) noexcept {
  switch (s) {
    case Shape::Disk: return "disk";
    case Shape::Annulus: return "annulus";
    case Shape::TwoBlobs: return "two-blobs";
  }
  return "?";
}

Shape parse_shape(std::string_view name) {
  if (name == "disk") return Shape::Disk;
  if (name == "annulus") return Shape::Annulus;
  if (name == "two-blobs" || name == "two_blobs") return Shape::TwoBlobs;
  throw ContractError("unknown shape '" + std::string(name) + "'");
}

double preset_noise(std::string_view preset) {
  if (preset == "easy") return 0.1;
  if (preset == "medium") return 0.5;
  if (preset == "hard") return 1.0;
  throw ContractError("unknown preset '" + std::string(preset) + "'");
}

void TaskConfig::validate() const {
  if (image_side < 8) throw ContractError("image_side must be at least 8");
  if (n_images < 1) throw ContractError("n_images must be at least 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ContractError("noise_sigma must be finite and non-negative");
  }
}

std::vector<Sample> generate(const TaskConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::size_t side = cfg.image_side;
  const std::size_t pixels = side * side;
  const double denom = static_cast<double>(side - 1);

  std::vector<Sample> out;
  out.reserve(cfg.n_images);
  for (std::size_t n = 0; n < cfg.n_images; ++n) {
    Sample s;
    while (!draw_mask(rng, cfg.shape, side, s.mask)) {
    }
    s.features.resize(static_cast<Eigen::Index>(pixels), TaskConfig::kFeatureDim);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t fg = 0;
    for (std::size_t row = 0; row < side; ++row) {
      for (std::size_t col = 0; col < side; ++col) {
        const std::size_t i = row * side + col;
        const auto r = static_cast<Eigen::Index>(i);
        s.features(r, 0) = 2.0 * static_cast<double>(col) / denom - 1.0;
        s.features(r, 1) = 2.0 * static_cast<double>(row) / denom - 1.0;
        const double base = s.mask[i];
        s.features(r, 2) = cfg.noise_sigma > 0.0 ? base + cfg.noise_sigma * noise(rng) : base;
        fg += s.mask[i];
      }
    }
    s.foreground_fraction = static_cast<double>(fg) / static_cast<double>(pixels);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Fold> kfold_split(std::size_t dataset_size, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ContractError("kfold_split: k must be at least 2");
  if (dataset_size < k) throw ContractError("kfold_split: fewer items than folds");
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t begin = f * dataset_size / k;
    const std::size_t end = (f + 1) * dataset_size / k;
    for (std::size_t i = 0; i < dataset_size; ++i) {
      (i >= begin && i < end ? folds[f].val : folds[f].train).push_back(order[i]);
    }
  }
  return folds;
}

void write_dataset(const std::filesystem::path& dir, const TaskConfig& cfg,
                   const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir);
  const auto data_path = dir / "samples.actd";
  save_samples(data_path, samples);

  nlohmann::json manifest;
  manifest["format"] = "ACTD";
  manifest["version"] = kFormatVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = {
      {"image_side", cfg.image_side}, {"n_images", cfg.n_images},
      {"shape", std::string(to_string(cfg.shape))}, {"noise_sigma", cfg.noise_sigma},
      {"feature_dim", TaskConfig::kFeatureDim},
  };
  manifest["files"] = {{"samples.actd", {{"fnv1a64", file_checksum(data_path)},
                                         {"bytes", std::filesystem::file_size(data_path)}}}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace outact
