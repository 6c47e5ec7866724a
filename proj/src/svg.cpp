#include "outact/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "outact/error.hpp"

namespace outact {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 160.0;  // legend column
constexpr double kTop = 36.0;
constexpr double kBottom = 52.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string stroke_attrs(const SeriesStyle& s) {
  std::string a = "stroke=\"" + s.color + "\" stroke-width=\"1.8\" fill=\"none\"";
  if (s.dashed) a += " stroke-dasharray=\"6,4\"";
  return a;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(lo < hi)) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

}  // namespace

const std::string& palette_color(std::size_t i) {
  static const std::array<std::string, 8> colors = {
      "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
  };
  return colors[i % colors.size()];
}

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::set_x_range(double lo, double hi) { x_range_ = {lo, hi}; }
void SvgPlot::set_y_range(double lo, double hi) { y_range_ = {lo, hi}; }

void SvgPlot::add_curve(std::span<const double> x, std::span<const double> y, SeriesStyle style) {
  if (x.size() != y.size()) throw ContractError("add_curve: x and y differ in length");
  curves_.push_back({{x.begin(), x.end()}, {y.begin(), y.end()}, std::move(style)});
}

void SvgPlot::add_bars(std::span<const double> left, std::span<const double> right,
                       std::span<const double> height, SeriesStyle style) {
  if (left.size() != right.size() || left.size() != height.size()) {
    throw ContractError("add_bars: inputs differ in length");
  }
  bars_.push_back({{left.begin(), left.end()},
                   {right.begin(), right.end()},
                   {height.begin(), height.end()},
                   std::move(style)});
}

void SvgPlot::add_reference_line(double x0, double y0, double x1, double y1, SeriesStyle style) {
  refs_.push_back({x0, y0, x1, y1, std::move(style)});
}

std::pair<double, double> SvgPlot::x_range() const {
  if (x_range_) return *x_range_;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Curve& c : curves_) {
    for (double v : c.x) {
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
  }
  for (const Bars& b : bars_) {
    for (double v : b.left) lo = std::min(lo, v);
    for (double v : b.right) hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return padded(lo, hi);
}

std::pair<double, double> SvgPlot::y_range() const {
  if (y_range_) return *y_range_;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Curve& c : curves_) {
    for (double v : c.y) {
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
  }
  for (const Bars& b : bars_) {
    lo = std::min(lo, 0.0);
    for (double v : b.height) {
      if (std::isfinite(v)) hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return padded(lo, hi);
}

std::string SvgPlot::render() const {
  const auto [x0, x1] = x_range();
  const auto [y0, y1] = y_range();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title_) << "</text>\n";

  // Axes frame and ticks.
  o << "<g stroke=\"black\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw
    << "\" y2=\"" << kTop + ph << "\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + ph << "\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0;
    const double fy = y0 + (y1 - y0) * i / 5.0;
    o << "<line x1=\"" << sx(fx) << "\" y1=\"" << kTop + ph << "\" x2=\"" << sx(fx)
      << "\" y2=\"" << kTop + ph + 5 << "\"/>\n";
    o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << sy(fy) << "\" x2=\"" << kLeft
      << "\" y2=\"" << sy(fy) << "\"/>\n";
  }
  o << "</g>\n<g font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0;
    const double fy = y0 + (y1 - y0) * i / 5.0;
    o << "<text x=\"" << sx(fx) << "\" y=\"" << kTop + ph + 18
      << "\" text-anchor=\"middle\">" << fx << "</text>\n";
    o << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\">" << fy
      << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(x_label_) << "</text>\n";
  o << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 16 " << kTop + ph / 2 << ")\">" << escape(y_label_)
    << "</text>\n";

  for (const Bars& b : bars_) {
    for (std::size_t i = 0; i < b.left.size(); ++i) {
      if (!std::isfinite(b.height[i]) || !std::isfinite(b.left[i]) || !std::isfinite(b.right[i])) {
        continue;
      }
      const double top = sy(std::max(b.height[i], 0.0));
      const double base = sy(std::max(y0, 0.0));
      o << "<rect x=\"" << sx(b.left[i]) << "\" y=\"" << top << "\" width=\""
        << std::max(0.5, sx(b.right[i]) - sx(b.left[i])) << "\" height=\"" << base - top
        << "\" fill=\"" << b.style.color << "\" fill-opacity=\"0.35\" stroke=\"" << b.style.color
        << "\"/>\n";
    }
  }
  for (const Reference& r : refs_) {
    o << "<line x1=\"" << sx(r.x0) << "\" y1=\"" << sy(r.y0) << "\" x2=\"" << sx(r.x1)
      << "\" y2=\"" << sy(r.y1) << "\" " << stroke_attrs(r.style) << "/>\n";
  }
  for (const Curve& c : curves_) {
    std::ostringstream d;
    d.precision(6);
    bool pen_down = false;
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) {
        pen_down = false;
        continue;
      }
      d << (pen_down ? " L" : " M") << sx(c.x[i]) << ',' << sy(std::clamp(c.y[i], y0, y1));
      pen_down = true;
    }
    o << "<path d=\"" << d.str().substr(d.str().empty() ? 0 : 1) << "\" "
      << stroke_attrs(c.style) << "/>\n";
  }

  // Legend.
  double ly = kTop + 8;
  auto legend = [&](const SeriesStyle& s) {
    if (s.label.empty()) return;
    const double lx = kLeft + pw + 14;
    o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\"" << ly
      << "\" " << stroke_attrs(s) << "/>\n";
    o << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
      << escape(s.label) << "</text>\n";
    ly += 18;
  };
  for (const Curve& c : curves_) legend(c.style);
  for (const Bars& b : bars_) legend(b.style);
  for (const Reference& r : refs_) legend(r.style);

  o << "</svg>\n";
  return o.str();
}

void SvgPlot::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace outact
