#include "outact/losses.hpp"

#include <cmath>
#include <string>

#include "outact/error.hpp"

namespace outact {

namespace {

void check_shapes(std::span<const double> yhat, std::span<const double> y) {
  if (yhat.empty()) throw ContractError("loss: empty input");
  if (yhat.size() != y.size()) throw ContractError("loss: length mismatch");
}

}  // namespace

std::string_view to_string(Loss l) noexcept {
  switch (l) {
    case Loss::Bce: return "bce";
    case Loss::Mse: return "mse";
    case Loss::SoftDice: return "dice";
  }
  return "?";
}

Loss parse_loss(std::string_view name) {
  for (Loss l : kAllLosses) {
    if (name == to_string(l)) return l;
  }
  if (name == "soft_dice") return Loss::SoftDice;
  throw ContractError("unknown loss '" + std::string(name) + "'");
}

double loss_value(LossKind kind, std::span<const double> yhat, std::span<const double> y) {
  check_shapes(yhat, y);
  const double n = static_cast<double>(yhat.size());
  switch (kind.tag) {
    case Loss::Bce: {
      double sum = 0.0;
      for (std::size_t i = 0; i < yhat.size(); ++i) {
        sum -= y[i] * std::log(yhat[i]) + (1.0 - y[i]) * std::log1p(-yhat[i]);
      }
      return sum / n;
    }
    case Loss::Mse: {
      double sum = 0.0;
      for (std::size_t i = 0; i < yhat.size(); ++i) {
        const double d = yhat[i] - y[i];
        sum += d * d;
      }
      return sum / n;
    }
    case Loss::SoftDice: {
      double inter = 0.0;
      double total = 0.0;
      for (std::size_t i = 0; i < yhat.size(); ++i) {
        inter += yhat[i] * y[i];
        total += yhat[i] + y[i];
      }
      return 1.0 - 2.0 * inter / (total + kind.denom_epsilon);
    }
  }
  return 0.0;
}

std::vector<double> loss_grad_probability(LossKind kind, std::span<const double> yhat,
                                          std::span<const double> y) {
  check_shapes(yhat, y);
  const std::size_t n = yhat.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> g(n);
  switch (kind.tag) {
    case Loss::Bce:
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = (-y[i] / yhat[i] + (1.0 - y[i]) / (1.0 - yhat[i])) * inv_n;
      }
      break;
    case Loss::Mse:
      for (std::size_t i = 0; i < n; ++i) g[i] = 2.0 * (yhat[i] - y[i]) * inv_n;
      break;
    case Loss::SoftDice: {
      double inter = 0.0;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        inter += yhat[i] * y[i];
        total += yhat[i] + y[i];
      }
      const double denom = total + kind.denom_epsilon;
      const double denom2 = denom * denom;
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = -(2.0 * y[i] * denom - 2.0 * inter) / denom2;
      }
      break;
    }
  }
  return g;
}

std::vector<double> loss_grad_logit(LossKind kind, ActivationKind act, std::span<const double> x,
                                    std::span<const double> y,
                                    std::optional<RescaleContext> ctx) {
  check_shapes(x, y);
  const std::vector<double> p = probabilities(act, x, ctx);
  const std::vector<double> gp = loss_grad_probability(kind, p, y);
  return activation_vjp(act, x, gp, ctx);
}

double loss_from_logits(LossKind kind, ActivationKind act, std::span<const double> x,
                        std::span<const double> y, std::optional<RescaleContext> ctx) {
  check_shapes(x, y);
  return loss_value(kind, probabilities(act, x, ctx), y);
}

}  // namespace outact
