#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace outact {

/// Mean binary cross-entropy of clamped predictions; bitwise identical to
/// loss_value(Bce, yhat, y).
double nll(std::span<const double> yhat, std::span<const double> y);

/// 2 sum(1(p > t) y) / (sum 1(p > t) + sum y), and 1.0 when both sums are 0.
double dice_at_threshold(std::span<const double> yhat, std::span<const double> y, double t);

inline constexpr std::size_t kThresholdCount = 21;

/// {0, 0.05, ..., 1}, each computed as k / 20.
std::array<double, kThresholdCount> threshold_sweep();

struct DiceSweepResult {
  double best_threshold = 0.0;
  double best_dice = 0.0;
  std::array<double, kThresholdCount> thresholds{};
  std::array<double, kThresholdCount> dice{};
};

/// Evaluates every sweep threshold; ties go to the smallest threshold.
DiceSweepResult best_threshold_dice(std::span<const double> yhat, std::span<const double> y);

enum class BinningStrategy { EvenlySpaced, Adaptive };

std::string_view to_string(BinningStrategy s) noexcept;

struct ReliabilityBin {
  double lo = 0.0;   // edge interval; for adaptive bins the min/max member
  double hi = 0.0;
  std::size_t count = 0;
  double confidence = 0.0;  // NaN when count == 0
  double fraction = 0.0;    // NaN when count == 0
};

struct ReliabilityDiagram {
  BinningStrategy strategy = BinningStrategy::EvenlySpaced;
  std::size_t n_bins = 0;
  double filter_lo = 0.0;  // adaptive only
  double filter_hi = 1.0;  // adaptive only
  std::vector<ReliabilityBin> bins;

  std::size_t total_count() const noexcept;
};

struct ReliabilityOptions {
  std::size_t n_bins = 15;
  double filter_lo = 1e-2;
  double filter_hi = 1.0 - 1e-2;
};

/// Evenly spaced: bins [k/n, (k+1)/n) with the last bin closed, no filtering.
/// Adaptive: drops p < filter_lo and p > filter_hi, then splits the remaining
/// predictions by sorted rank into n_bins bins of floor-balanced size. Ties
/// keep input order, so equal values may straddle a bin boundary.
///
/// Per-bin sums run in input order. Throws EmptyDiagramError when adaptive
/// filtering removes everything.
ReliabilityDiagram reliability(std::span<const double> yhat, std::span<const double> y,
                               BinningStrategy strategy, const ReliabilityOptions& opts = {});

/// Largest |confidence - fraction| over non-empty bins.
double calibration_gap(const ReliabilityDiagram& diagram);

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double step = 0.0;
  double bandwidth = 0.0;
};

/// Gaussian KDE of the predictions whose label is 1, evaluated on a uniform
/// grid over [0, 1]. Bandwidth 1.06 sigma m^(-1/5) with the sample standard
/// deviation, floored at one grid step so point masses stay resolvable.
DensityCurve kde_conditional(std::span<const double> yhat, std::span<const double> y,
                             std::size_t grid_points = 512);

}  // namespace outact
