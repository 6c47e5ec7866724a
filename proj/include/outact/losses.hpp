#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "outact/activations.hpp"

namespace outact {

enum class Loss { Bce, Mse, SoftDice };

inline constexpr Loss kAllLosses[] = {Loss::Bce, Loss::Mse, Loss::SoftDice};

struct LossKind {
  Loss tag = Loss::Bce;
  /// Added to the soft dice denominator only.
  double denom_epsilon = 1e-7;

  friend bool operator==(const LossKind&, const LossKind&) = default;
};

std::string_view to_string(Loss l) noexcept;
Loss parse_loss(std::string_view name);

/// Loss of one image.
///
///   Bce      mean of -[y log p + (1 - y) log(1 - p)]
///   Mse      mean of (p - y)^2
///   SoftDice 1 - 2 sum(p y) / (sum p + sum y + denom_epsilon)
///
/// `yhat` is expected to be clamped already. Throws ContractError on empty
/// input or a length mismatch.
double loss_value(LossKind kind, std::span<const double> yhat, std::span<const double> y);

/// d loss / d yhat_i. Soft dice couples every pixel through its sums.
std::vector<double> loss_grad_probability(LossKind kind, std::span<const double> yhat,
                                          std::span<const double> y);

/// d loss(clamp(f(x))) / d x_i. Clamped pixels get zero gradient.
///
/// For Linear, a given `ctx` is held fixed; without one the context is the
/// min/max of `x` and the gradient includes its dependence on x.
std::vector<double> loss_grad_logit(LossKind kind, ActivationKind act, std::span<const double> x,
                                    std::span<const double> y,
                                    std::optional<RescaleContext> ctx = std::nullopt);

/// Forward counterpart of loss_grad_logit.
double loss_from_logits(LossKind kind, ActivationKind act, std::span<const double> x,
                        std::span<const double> y,
                        std::optional<RescaleContext> ctx = std::nullopt);

}  // namespace outact
