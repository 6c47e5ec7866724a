#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace outact {

struct SeriesStyle {
  std::string color = "#1f77b4";
  bool dashed = false;
  std::string label;
};

/// Minimal line/bar chart writer. Each curve becomes one <path>; axes, ticks,
/// reference lines and legend swatches are <line>, bars are <rect>.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void set_x_range(double lo, double hi);
  void set_y_range(double lo, double hi);

  /// Non-finite y values split the curve into separate subpaths.
  void add_curve(std::span<const double> x, std::span<const double> y, SeriesStyle style);
  /// Bars spanning [left, right] from 0 to height; non-finite heights skipped.
  void add_bars(std::span<const double> left, std::span<const double> right,
                std::span<const double> height, SeriesStyle style);
  void add_reference_line(double x0, double y0, double x1, double y1, SeriesStyle style);

  std::string render() const;
  void save(const std::filesystem::path& path) const;

 private:
  struct Curve {
    std::vector<double> x, y;
    SeriesStyle style;
  };
  struct Bars {
    std::vector<double> left, right, height;
    SeriesStyle style;
  };
  struct Reference {
    double x0, y0, x1, y1;
    SeriesStyle style;
  };

  std::pair<double, double> x_range() const;
  std::pair<double, double> y_range() const;

  std::string title_, x_label_, y_label_;
  std::optional<std::pair<double, double>> x_range_, y_range_;
  std::vector<Curve> curves_;
  std::vector<Bars> bars_;
  std::vector<Reference> refs_;
};

/// A repeatable palette, indexed modulo its size.
const std::string& palette_color(std::size_t i);

}  // namespace outact
