#include "outact/nnet.hpp"

#include <cmath>
#include <random>

#include "outact/error.hpp"

namespace outact {

namespace {

struct ForwardTrace {
  std::vector<Matrix> inputs;  // input to layer l
  std::vector<Matrix> pre;     // pre-activation of layer l
};

void check_input(const PixelClassifier& net, const Matrix& features) {
  if (net.layers.empty()) throw ContractError("classifier has no layers");
  if (static_cast<std::size_t>(features.cols()) != net.input_size()) {
    throw ContractError("feature dimension " + std::to_string(features.cols()) +
                        " does not match classifier input " +
                        std::to_string(net.input_size()));
  }
}

ForwardTrace trace_forward(const PixelClassifier& net, const Matrix& features) {
  check_input(net, features);
  ForwardTrace t;
  const std::size_t depth = net.layers.size();
  t.inputs.reserve(depth);
  t.pre.reserve(depth);
  t.inputs.push_back(features);
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = net.layers[l];
    Matrix z = t.inputs[l] * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    t.pre.push_back(std::move(z));
    if (l + 1 < depth) {
      t.inputs.push_back(t.pre.back().cwiseMax(0.0));
    }
  }
  return t;
}

std::vector<double> logits_of(const Matrix& last_pre) {
  std::vector<double> out(static_cast<std::size_t>(last_pre.rows()));
  for (Eigen::Index i = 0; i < last_pre.rows(); ++i) out[i] = last_pre(i, 0);
  return out;
}

void check_batch(const Batch& batch) {
  if (batch.images() == 0) throw ContractError("batch holds no images");
  if (batch.offsets.back() != batch.targets.size() ||
      static_cast<std::size_t>(batch.features.rows()) != batch.targets.size()) {
    throw ContractError("batch offsets, targets and features disagree");
  }
}

// Per-image loss averaged over images, and optionally d loss / d logit.
double loss_and_logit_grad(const std::vector<double>& logits, const Batch& batch,
                           ActivationKind act, LossKind loss,
                           std::vector<double>* grad_logits) {
  const std::size_t images = batch.images();
  const std::span<const double> all{logits};
  const bool batch_context = act.tag == Activation::Linear && act.scope == RescaleScope::PerBatch;

  std::vector<double> probs;
  if (batch_context) probs = probabilities(act, all);

  double total = 0.0;
  std::vector<double> grad_prob;
  if (grad_logits) grad_prob.assign(logits.size(), 0.0);
  for (std::size_t k = 0; k < images; ++k) {
    const std::size_t begin = batch.offsets[k];
    const std::size_t count = batch.offsets[k + 1] - begin;
    const std::span<const double> y{batch.targets.data() + begin, count};
    std::vector<double> local;
    std::span<const double> p;
    if (batch_context) {
      p = std::span<const double>{probs.data() + begin, count};
    } else {
      local = probabilities(act, all.subspan(begin, count));
      p = local;
    }
    total += loss_value(loss, p, y);
    if (grad_logits) {
      const std::vector<double> g = loss_grad_probability(loss, p, y);
      for (std::size_t i = 0; i < count; ++i) {
        grad_prob[begin + i] = g[i] / static_cast<double>(images);
      }
    }
  }

  if (grad_logits) {
    if (batch_context) {
      *grad_logits = activation_vjp(act, all, grad_prob);
    } else {
      grad_logits->assign(logits.size(), 0.0);
      for (std::size_t k = 0; k < images; ++k) {
        const std::size_t begin = batch.offsets[k];
        const std::size_t count = batch.offsets[k + 1] - begin;
        const std::vector<double> g =
            activation_vjp(act, all.subspan(begin, count),
                           std::span<const double>{grad_prob}.subspan(begin, count));
        std::copy(g.begin(), g.end(), grad_logits->begin() + static_cast<std::ptrdiff_t>(begin));
      }
    }
  }
  return total / static_cast<double>(images);
}

template <typename Fn>
void for_each_block(std::vector<Layer>& layers, Fn&& fn) {
  for (Layer& layer : layers) {
    fn(std::span<double>{layer.weights.data(), static_cast<std::size_t>(layer.weights.size())});
    fn(std::span<double>{layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
  }
}

template <typename Fn>
void for_each_block(const std::vector<Layer>& layers, Fn&& fn) {
  for (const Layer& layer : layers) {
    fn(std::span<const double>{layer.weights.data(),
                               static_cast<std::size_t>(layer.weights.size())});
    fn(std::span<const double>{layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
  }
}

std::vector<double> flatten_layers(const std::vector<Layer>& layers) {
  std::vector<double> out;
  for_each_block(layers, [&](std::span<const double> block) {
    out.insert(out.end(), block.begin(), block.end());
  });
  return out;
}

}  // namespace

std::size_t PixelClassifier::input_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t PixelClassifier::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Batch make_batch(std::span<const Sample> samples) {
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(samples, all);
}

Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  Batch b;
  if (indices.empty()) throw ContractError("make_batch: no images selected");
  std::size_t rows = 0;
  const Eigen::Index dim = samples[indices.front()].features.cols();
  b.offsets.push_back(0);
  for (std::size_t idx : indices) {
    if (idx >= samples.size()) throw ContractError("make_batch: index out of range");
    const Sample& s = samples[idx];
    if (s.features.cols() != dim || static_cast<std::size_t>(s.features.rows()) != s.pixels()) {
      throw ContractError("make_batch: inconsistent sample shapes");
    }
    rows += s.pixels();
    b.offsets.push_back(rows);
  }
  b.features.resize(static_cast<Eigen::Index>(rows), dim);
  b.targets.reserve(rows);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Sample& s = samples[indices[k]];
    b.features.middleRows(static_cast<Eigen::Index>(b.offsets[k]), s.features.rows()) = s.features;
    b.targets.insert(b.targets.end(), s.mask.begin(), s.mask.end());
  }
  return b;
}

PixelClassifier init_classifier(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ContractError("init_classifier: need at least two sizes");
  if (layer_sizes.back() != 1) throw ContractError("init_classifier: last layer size must be 1");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ContractError("init_classifier: zero-width layer");
  }
  std::mt19937_64 rng(seed);
  PixelClassifier net;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::vector<double> forward(const PixelClassifier& net, const Matrix& features) {
  check_input(net, features);
  Matrix h = features;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    Matrix z = h * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < net.layers.size()) {
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return logits_of(h);
}

Gradients backward(const PixelClassifier& net, const Batch& batch, ActivationKind act,
                   LossKind loss) {
  check_batch(batch);
  const ForwardTrace t = trace_forward(net, batch.features);
  const std::vector<double> logits = logits_of(t.pre.back());

  std::vector<double> dlogit;
  Gradients g;
  g.loss = loss_and_logit_grad(logits, batch, act, loss, &dlogit);

  Matrix delta = Eigen::Map<const Matrix>(dlogit.data(), static_cast<Eigen::Index>(dlogit.size()), 1);
  g.layers.resize(net.layers.size());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    g.layers[l].weights = delta.transpose() * t.inputs[l];
    g.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix upstream = delta * net.layers[l].weights;
      // ReLU subgradient is 0 at 0.
      delta = upstream.cwiseProduct((t.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

double batch_loss(const PixelClassifier& net, const Batch& batch, ActivationKind act,
                  LossKind loss) {
  check_batch(batch);
  return loss_and_logit_grad(forward(net, batch.features), batch, act, loss, nullptr);
}

std::vector<double> predict(const PixelClassifier& net, const Sample& sample, ActivationKind act) {
  return probabilities(act, forward(net, sample.features));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractError("adam_step: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient at parameter " + std::to_string(i), i);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void adam_step(PixelClassifier& net, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (grads.layers.size() != net.layers.size()) {
    throw ContractError("adam_step: gradient layout does not match classifier");
  }
  std::vector<double> params = flatten(net);
  const std::vector<double> g = flatten(grads);
  adam_step(params, g, state, lr, cfg);
  unflatten(params, net);
}

std::vector<double> flatten(const PixelClassifier& net) { return flatten_layers(net.layers); }

std::vector<double> flatten(const Gradients& grads) { return flatten_layers(grads.layers); }

void unflatten(std::span<const double> values, PixelClassifier& net) {
  if (values.size() != net.parameter_count()) {
    throw ContractError("unflatten: size does not match classifier");
  }
  std::size_t offset = 0;
  for_each_block(net.layers, [&](std::span<double> block) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), block.size(), block.begin());
    offset += block.size();
  });
}

}  // namespace outact
