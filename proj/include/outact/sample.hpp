#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace outact {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One image: a feature row per pixel and the binary ground-truth mask.
struct Sample {
  Matrix features;                  // pixels x feature_dim
  std::vector<std::uint8_t> mask;   // pixels, entries in {0, 1}
  double foreground_fraction = 0.0;

  std::size_t pixels() const noexcept { return mask.size(); }
  std::vector<double> targets() const { return {mask.begin(), mask.end()}; }
};

}  // namespace outact
