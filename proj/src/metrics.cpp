#include "outact/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "outact/error.hpp"
#include "outact/losses.hpp"

namespace outact {

namespace {

void check_pair(std::span<const double> yhat, std::span<const double> y, const char* op) {
  if (yhat.size() != y.size()) {
    throw ContractError(std::string(op) + ": length mismatch");
  }
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t even_bin(double p, std::size_t n) {
  const double dn = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::clamp(std::floor(p * dn), 0.0, dn - 1.0));
  // Keep membership consistent with the edges k / n themselves.
  while (k > 0 && p < static_cast<double>(k) / dn) --k;
  while (k + 1 < n && p >= static_cast<double>(k + 1) / dn) ++k;
  return k;
}

void finish_bins(ReliabilityDiagram& d, std::span<const double> yhat, std::span<const double> y,
                 std::span<const std::ptrdiff_t> bin_of) {
  std::vector<double> conf(d.n_bins, 0.0);
  std::vector<double> frac(d.n_bins, 0.0);
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    if (bin_of[i] < 0) continue;
    const auto b = static_cast<std::size_t>(bin_of[i]);
    conf[b] += yhat[i];
    frac[b] += y[i];
    ++d.bins[b].count;
  }
  for (std::size_t b = 0; b < d.n_bins; ++b) {
    ReliabilityBin& bin = d.bins[b];
    if (bin.count == 0) {
      bin.confidence = kNaN;
      bin.fraction = kNaN;
    } else {
      bin.confidence = conf[b] / static_cast<double>(bin.count);
      bin.fraction = frac[b] / static_cast<double>(bin.count);
    }
  }
}

}  // namespace

double nll(std::span<const double> yhat, std::span<const double> y) {
  return loss_value(LossKind{Loss::Bce}, yhat, y);
}

double dice_at_threshold(std::span<const double> yhat, std::span<const double> y, double t) {
  check_pair(yhat, y, "dice_at_threshold");
  double inter = 0.0;
  double predicted = 0.0;
  double truth = 0.0;
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    const double hit = yhat[i] > t ? 1.0 : 0.0;
    inter += hit * y[i];
    predicted += hit;
    truth += y[i];
  }
  const double denom = predicted + truth;
  return denom == 0.0 ? 1.0 : 2.0 * inter / denom;
}

std::array<double, kThresholdCount> threshold_sweep() {
  std::array<double, kThresholdCount> t{};
  for (std::size_t k = 0; k < kThresholdCount; ++k) t[k] = static_cast<double>(k) / 20.0;
  return t;
}

DiceSweepResult best_threshold_dice(std::span<const double> yhat, std::span<const double> y) {
  check_pair(yhat, y, "best_threshold_dice");
  DiceSweepResult r;
  r.thresholds = threshold_sweep();
  r.best_dice = -1.0;
  for (std::size_t k = 0; k < kThresholdCount; ++k) {
    r.dice[k] = dice_at_threshold(yhat, y, r.thresholds[k]);
    if (r.dice[k] > r.best_dice) {
      r.best_dice = r.dice[k];
      r.best_threshold = r.thresholds[k];
    }
  }
  return r;
}

std::string_view to_string(BinningStrategy s) noexcept {
  return s == BinningStrategy::EvenlySpaced ? "evenly_spaced" : "adaptive";
}

std::size_t ReliabilityDiagram::total_count() const noexcept {
  std::size_t n = 0;
  for (const ReliabilityBin& b : bins) n += b.count;
  return n;
}

ReliabilityDiagram reliability(std::span<const double> yhat, std::span<const double> y,
                               BinningStrategy strategy, const ReliabilityOptions& opts) {
  check_pair(yhat, y, "reliability");
  if (opts.n_bins == 0) throw ContractError("reliability: n_bins must be positive");

  ReliabilityDiagram d;
  d.strategy = strategy;
  d.n_bins = opts.n_bins;
  d.bins.resize(opts.n_bins);
  std::vector<std::ptrdiff_t> bin_of(yhat.size(), -1);

  if (strategy == BinningStrategy::EvenlySpaced) {
    d.filter_lo = 0.0;
    d.filter_hi = 1.0;
    const double dn = static_cast<double>(opts.n_bins);
    for (std::size_t b = 0; b < opts.n_bins; ++b) {
      d.bins[b].lo = static_cast<double>(b) / dn;
      d.bins[b].hi = static_cast<double>(b + 1) / dn;
    }
    for (std::size_t i = 0; i < yhat.size(); ++i) {
      bin_of[i] = static_cast<std::ptrdiff_t>(even_bin(yhat[i], opts.n_bins));
    }
    finish_bins(d, yhat, y, bin_of);
    return d;
  }

  d.filter_lo = opts.filter_lo;
  d.filter_hi = opts.filter_hi;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    if (yhat[i] >= opts.filter_lo && yhat[i] <= opts.filter_hi) kept.push_back(i);
  }
  if (kept.empty()) {
    throw EmptyDiagramError("reliability: every prediction was filtered out");
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [&](std::size_t a, std::size_t b) { return yhat[a] < yhat[b]; });
  const std::size_t m = kept.size();
  for (std::size_t b = 0; b < opts.n_bins; ++b) {
    const std::size_t first = b * m / opts.n_bins;
    const std::size_t last = (b + 1) * m / opts.n_bins;
    ReliabilityBin& bin = d.bins[b];
    if (first == last) {
      bin.lo = bin.hi = kNaN;
      continue;
    }
    bin.lo = yhat[kept[first]];
    bin.hi = yhat[kept[last - 1]];
    for (std::size_t r = first; r < last; ++r) {
      bin_of[kept[r]] = static_cast<std::ptrdiff_t>(b);
    }
  }
  finish_bins(d, yhat, y, bin_of);
  return d;
}

double calibration_gap(const ReliabilityDiagram& diagram) {
  double gap = -1.0;
  for (const ReliabilityBin& b : diagram.bins) {
    if (b.count == 0) continue;
    gap = std::max(gap, std::abs(b.confidence - b.fraction));
  }
  if (gap < 0.0) throw ContractError("calibration_gap: every bin is empty");
  return gap;
}

DensityCurve kde_conditional(std::span<const double> yhat, std::span<const double> y,
                             std::size_t grid_points) {
  check_pair(yhat, y, "kde_conditional");
  if (grid_points < 2) throw ContractError("kde_conditional: need at least two grid points");
  std::vector<double> fg;
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    if (y[i] == 1.0) fg.push_back(yhat[i]);
  }
  if (fg.size() < 2) {
    throw ContractError("kde_conditional: fewer than two foreground predictions");
  }
  const double m = static_cast<double>(fg.size());
  const double mean = std::accumulate(fg.begin(), fg.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : fg) ss += (v - mean) * (v - mean);
  const double sigma = std::sqrt(ss / (m - 1.0));

  DensityCurve c;
  c.step = 1.0 / static_cast<double>(grid_points - 1);
  c.bandwidth = std::max(1.06 * sigma * std::pow(m, -0.2), c.step);
  c.grid.resize(grid_points);
  c.density.assign(grid_points, 0.0);
  const double norm = 1.0 / (m * c.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = static_cast<double>(g) * c.step;
    c.grid[g] = x;
    double sum = 0.0;
    for (double v : fg) {
      const double u = (x - v) / c.bandwidth;
      sum += std::exp(-0.5 * u * u);
    }
    c.density[g] = sum * norm;
  }
  return c;
}

}  // namespace outact
