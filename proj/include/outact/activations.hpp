#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace outact {

/// The seven output activations, listed with the five smooth ones first in
/// ascending order of effective domain.
enum class Activation {
  NormalCdf,
  Sigmoid,
  InverseSquareRoot,
  Arctangent,
  Softsign,
  Linear,
  HardTanh,
};

inline constexpr std::array<Activation, 7> kAllActivations = {
    Activation::NormalCdf,  Activation::Sigmoid,  Activation::InverseSquareRoot,
    Activation::Arctangent, Activation::Softsign, Activation::Linear,
    Activation::HardTanh,
};

inline constexpr std::array<Activation, 5> kSmoothActivations = {
    Activation::NormalCdf, Activation::Sigmoid, Activation::InverseSquareRoot,
    Activation::Arctangent, Activation::Softsign,
};

/// Where Linear takes its min/max from when logits are produced in bulk.
enum class RescaleScope { PerImage, PerBatch };

struct ActivationKind {
  Activation tag = Activation::Sigmoid;
  /// Only meaningful for Linear.
  RescaleScope scope = RescaleScope::PerImage;

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;
};

/// Logit range used by the Linear activation.
struct RescaleContext {
  double x_min = 0.0;
  double x_max = 1.0;
};

struct EffectiveDomain {
  double lo = 0.0;
  double hi = 0.0;
  double epsilon = 0.0;
  bool rounded = false;
};

inline constexpr double kProbabilityFloor = 1e-7;
inline constexpr double kProbabilityCeil = 1.0 - 1e-7;

/// Odd-symmetric around 0 with f(0) = 1/2 (all but Linear and HardTanh).
bool is_symmetric(Activation a) noexcept;
/// Differentiable everywhere.
bool is_smooth(Activation a) noexcept;

std::string_view to_string(Activation a) noexcept;
/// Human-readable name, e.g. "inverse square root".
std::string_view display_name(Activation a) noexcept;
/// Accepts the tags produced by to_string(); throws ContractError otherwise.
Activation parse_activation(std::string_view name);

/// Standard normal CDF.
double normal_cdf(double x) noexcept;
/// Standard normal density.
double normal_pdf(double x) noexcept;

/// f(x). Linear needs `ctx` and throws DegenerateContextError if
/// ctx->x_min >= ctx->x_max; other kinds ignore it.
double activate(ActivationKind kind, double x,
                std::optional<RescaleContext> ctx = std::nullopt);

/// f'(x). HardTanh uses the inclusive subgradient: 1 on [0, 1], 0 outside.
double activate_derivative(ActivationKind kind, double x,
                           std::optional<RescaleContext> ctx = std::nullopt);

/// Logit interval on which epsilon <= f(x) <= 1 - epsilon.
///
/// Smooth kinds are solved by bisection on the upper root (bracket grown by
/// doubling from [0, 1], tolerance 1e-9) and mirrored for the lower root. The
/// returned bounds are floor(lo) and ceil(hi), where a root that lies within
/// the solver tolerance of an integer counts as that integer. Linear returns
/// [x_min, x_max] of `ctx`; HardTanh returns [0, 1].
EffectiveDomain effective_domain(ActivationKind kind, double epsilon,
                                 std::optional<RescaleContext> ctx = std::nullopt);

/// min(max(p, 1e-7), 1 - 1e-7). Throws NumericError for non-finite p.
double clamp_probability(double p);

/// True where clamp_probability would change p.
inline bool clamp_active(double p) noexcept {
  return p < kProbabilityFloor || p > kProbabilityCeil;
}

/// Min/max of a logit block. Throws ContractError on empty input.
RescaleContext rescale_context(std::span<const double> logits);

/// Clamped probabilities for a block of logits. For Linear the context is
/// taken from `ctx` when given, else from the block itself; a degenerate
/// context yields 0.5 everywhere and a logged warning.
std::vector<double> probabilities(ActivationKind kind, std::span<const double> logits,
                                  std::optional<RescaleContext> ctx = std::nullopt);

}  // namespace outact

namespace outact {

/// Pulls a gradient w.r.t. clamped probabilities back to the logits, i.e. the
/// vector-Jacobian product of `probabilities(kind, logits, ctx)`.
///
/// Clamped entries pass no gradient. When Linear derives its context from
/// the block itself, the min and max logits also receive the gradient that
/// flows through x_min and x_max.
std::vector<double> activation_vjp(ActivationKind kind, std::span<const double> logits,
                                   std::span<const double> grad_probability,
                                   std::optional<RescaleContext> ctx = std::nullopt);

}  // namespace outact
