#include "outact/activations.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "outact/error.hpp"

namespace outact {

namespace {

constexpr double kRootTolerance = 1e-9;

double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

RescaleContext require_context(std::optional<RescaleContext> ctx) {
  if (!ctx) {
    throw ContractError("linear activation needs a rescale context");
  }
  if (!(ctx->x_min < ctx->x_max)) {
    throw DegenerateContextError("linear activation: x_min >= x_max");
  }
  return *ctx;
}

// Upper root of f(x) = 1 - epsilon for a strictly increasing symmetric f.
double upper_root(Activation tag, double epsilon) {
  const ActivationKind kind{tag};
  const double target = 1.0 - epsilon;
  double lo = 0.0;
  double hi = 1.0;
  while (activate(kind, hi) <= target) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi) || hi > 1e300) {
      throw NumericError("effective_domain: cannot bracket root");
    }
  }
  while (hi - lo > kRootTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (activate(kind, mid) <= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

bool is_symmetric(Activation a) noexcept {
  return a != Activation::Linear && a != Activation::HardTanh;
}

bool is_smooth(Activation a) noexcept { return is_symmetric(a); }

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::NormalCdf: return "normal_cdf";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::InverseSquareRoot: return "inverse_sqrt";
    case Activation::Arctangent: return "arctangent";
    case Activation::Softsign: return "softsign";
    case Activation::Linear: return "linear";
    case Activation::HardTanh: return "hardtanh";
  }
  return "?";
}

std::string_view display_name(Activation a) noexcept {
  switch (a) {
    case Activation::NormalCdf: return "normal CDF";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::InverseSquareRoot: return "inverse square root";
    case Activation::Arctangent: return "arctangent";
    case Activation::Softsign: return "softsign";
    case Activation::Linear: return "linear";
    case Activation::HardTanh: return "hardtanh";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (Activation a : kAllActivations) {
    if (name == to_string(a)) return a;
  }
  if (name == "cdf") return Activation::NormalCdf;
  if (name == "arctan") return Activation::Arctangent;
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

double normal_cdf(double x) noexcept {
  // erfc keeps full relative precision in the lower tail.
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double activate(ActivationKind kind, double x, std::optional<RescaleContext> ctx) {
  switch (kind.tag) {
    case Activation::NormalCdf:
      return normal_cdf(x);
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::InverseSquareRoot:
      return 0.5 * (x / std::hypot(1.0, x)) + 0.5;
    case Activation::Arctangent:
      return std::atan(x) * std::numbers::inv_pi + 0.5;
    case Activation::Softsign:
      return 0.5 * (x / (1.0 + std::abs(x))) + 0.5;
    case Activation::Linear: {
      const RescaleContext c = require_context(ctx);
      return std::clamp((x - c.x_min) / (c.x_max - c.x_min), 0.0, 1.0);
    }
    case Activation::HardTanh:
      if (x > 1.0) return 1.0;
      if (x < 0.0) return 0.0;
      return x;
  }
  return 0.5;
}

double activate_derivative(ActivationKind kind, double x, std::optional<RescaleContext> ctx) {
  switch (kind.tag) {
    case Activation::NormalCdf:
      return normal_pdf(x);
    case Activation::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::InverseSquareRoot: {
      const double r = std::hypot(1.0, x);
      return 0.5 / (r * r * r);
    }
    case Activation::Arctangent:
      return 1.0 / (std::numbers::pi * x * x + std::numbers::pi);
    case Activation::Softsign: {
      const double d = std::abs(x) + 1.0;
      return 0.5 / (d * d);
    }
    case Activation::Linear: {
      const RescaleContext c = require_context(ctx);
      if (x < c.x_min || x > c.x_max) return 0.0;
      return 1.0 / (c.x_max - c.x_min);
    }
    case Activation::HardTanh:
      return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
  }
  return 0.0;
}

EffectiveDomain effective_domain(ActivationKind kind, double epsilon,
                                 std::optional<RescaleContext> ctx) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw ContractError("effective_domain: epsilon must lie in (0, 1/2)");
  }
  if (kind.tag == Activation::Linear) {
    const RescaleContext c = require_context(ctx);
    return {c.x_min, c.x_max, epsilon, false};
  }
  if (kind.tag == Activation::HardTanh) {
    return {0.0, 1.0, epsilon, true};
  }
  const double hi_exact = upper_root(kind.tag, epsilon);
  // Snap roots that sit on an integer (softsign at eps = 0.0025 has x = 199).
  const double hi = std::ceil(hi_exact - kRootTolerance);
  const double lo = std::floor(-hi_exact + kRootTolerance);
  return {lo, hi, epsilon, true};
}

double clamp_probability(double p) {
  if (!std::isfinite(p)) {
    throw NumericError("clamp_probability: non-finite probability");
  }
  return std::clamp(p, kProbabilityFloor, kProbabilityCeil);
}

RescaleContext rescale_context(std::span<const double> logits) {
  if (logits.empty()) {
    throw ContractError("rescale_context: empty logit block");
  }
  const auto [mn, mx] = std::minmax_element(logits.begin(), logits.end());
  return {*mn, *mx};
}

std::vector<double> probabilities(ActivationKind kind, std::span<const double> logits,
                                  std::optional<RescaleContext> ctx) {
  std::vector<double> out(logits.size());
  if (kind.tag == Activation::Linear) {
    if (!ctx) ctx = rescale_context(logits);
    if (!(ctx->x_min < ctx->x_max)) {
      spdlog::warn("linear activation: degenerate rescale context, emitting 0.5");
      std::fill(out.begin(), out.end(), 0.5);
      return out;
    }
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = clamp_probability(activate(kind, logits[i], ctx));
  }
  return out;
}

std::vector<double> activation_vjp(ActivationKind kind, std::span<const double> logits,
                                   std::span<const double> grad_probability,
                                   std::optional<RescaleContext> ctx) {
  if (logits.size() != grad_probability.size()) {
    throw ContractError("activation_vjp: length mismatch");
  }
  const std::size_t n = logits.size();
  std::vector<double> out(n, 0.0);
  if (kind.tag != Activation::Linear) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = activate(kind, logits[i]);
      if (!clamp_active(p)) {
        out[i] = grad_probability[i] * activate_derivative(kind, logits[i]);
      }
    }
    return out;
  }

  const bool self_context = !ctx.has_value();
  std::size_t argmin = 0;
  std::size_t argmax = 0;
  if (self_context) {
    if (n == 0) return out;
    const auto [mn, mx] = std::minmax_element(logits.begin(), logits.end());
    argmin = static_cast<std::size_t>(mn - logits.begin());
    argmax = static_cast<std::size_t>(mx - logits.begin());
    ctx = RescaleContext{*mn, *mx};
  }
  if (!(ctx->x_min < ctx->x_max)) {
    return out;  // constant 0.5 output
  }
  const double range = ctx->x_max - ctx->x_min;
  double through_min = 0.0;
  double through_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = activate(kind, logits[i], ctx);
    if (clamp_active(f)) continue;
    const double g = grad_probability[i];
    out[i] += g * activate_derivative(kind, logits[i], ctx);
    if (self_context) {
      through_min += g * (f - 1.0) / range;
      through_max -= g * f / range;
    }
  }
  if (self_context) {
    out[argmin] += through_min;
    out[argmax] += through_max;
  }
  return out;
}

}  // namespace outact
