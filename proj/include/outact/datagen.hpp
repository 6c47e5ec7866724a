#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "outact/sample.hpp"

namespace outact {

enum class Shape { Disk, Annulus, TwoBlobs };

std::string_view to_string(Shape s) noexcept;
Shape parse_shape(std::string_view name);

/// Noise presets: easy 0.1, medium 0.5, hard 1.0.
double preset_noise(std::string_view preset);

struct TaskConfig {
  std::size_t image_side = 32;
  std::size_t n_images = 200;
  Shape shape = Shape::Disk;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  /// Features per pixel: x, y in [-1, 1] and noisy intensity.
  static constexpr std::size_t kFeatureDim = 3;

  void validate() const;
};

/// Random shapes on a square grid. Geometry scales with image_side / 32; at
/// side 32 a disk radius is uniform in [4, 10] pixels. Intensity is the mask
/// plus N(0, noise_sigma). Shapes that come out smaller than one pixel, or
/// that fill none or all of the image, are redrawn.
std::vector<Sample> generate(const TaskConfig& cfg);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Seeded shuffle followed by k contiguous validation blocks whose sizes
/// differ by at most one.
std::vector<Fold> kfold_split(std::size_t dataset_size, std::size_t k, std::uint64_t seed);

/// Writes `samples.actd` and `manifest.json` into `dir` (created if needed).
void write_dataset(const std::filesystem::path& dir, const TaskConfig& cfg,
                   const std::vector<Sample>& samples);

}  // namespace outact
