#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "outact/activations.hpp"
#include "outact/losses.hpp"
#include "outact/sample.hpp"

namespace outact {

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

/// Dense per-pixel classifier: affine layers with ReLU in between and a
/// single output logit. The output activation is applied by the caller.
struct PixelClassifier {
  std::vector<Layer> layers;

  std::size_t input_size() const;
  std::size_t parameter_count() const;
};

/// Same layout as the classifier it was computed for.
struct Gradients {
  std::vector<Layer> layers;
  double loss = 0.0;
};

/// Pixels of one or more images stacked row-wise.
struct Batch {
  Matrix features;
  std::vector<double> targets;
  /// Image boundaries into the rows: image k spans [offsets[k], offsets[k+1]).
  std::vector<std::size_t> offsets;

  std::size_t images() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
};

Batch make_batch(std::span<const Sample> samples);
Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices);

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
/// `layer_sizes` = {input, hidden..., 1}.
PixelClassifier init_classifier(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

/// Logit per row of `features`.
std::vector<double> forward(const PixelClassifier& net, const Matrix& features);

/// Loss of the batch (mean over images of the per-image loss) and its exact
/// gradient through loss, clamp, output activation and network. Linear takes
/// its context per image or per batch according to `act.scope`.
Gradients backward(const PixelClassifier& net, const Batch& batch, ActivationKind act,
                   LossKind loss);

/// Forward-only counterpart of backward().
double batch_loss(const PixelClassifier& net, const Batch& batch, ActivationKind act,
                  LossKind loss);

/// Clamped probabilities for one image, Linear rescaled per image.
std::vector<double> predict(const PixelClassifier& net, const Sample& sample,
                            ActivationKind act);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update. Throws NumericError naming the first
/// non-finite gradient entry; parameters are untouched in that case.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

/// Same update over every weight and bias of `net`, flattened layer by layer
/// (weights row-major, then bias).
void adam_step(PixelClassifier& net, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

std::vector<double> flatten(const PixelClassifier& net);
std::vector<double> flatten(const Gradients& grads);
void unflatten(std::span<const double> values, PixelClassifier& net);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t plateau_patience = 5;
  std::size_t stop_patience = 10;
  double lr_factor = 0.1;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Validation dice must exceed the best so far by more than this.
  double min_improvement = 1e-6;

  /// Throws ContractError when an invariant does not hold.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_dice = 0.0;
  /// Learning rate used during this epoch.
  double lr = 0.0;
  bool improved = false;
  /// The rate was multiplied by lr_factor at the end of this epoch.
  bool lr_reduced = false;
  std::size_t plateau_counter = 0;
  std::size_t stagnant_counter = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool failed = false;
  std::string failure;

  double best_val_dice() const;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

/// Stagnation bookkeeping for learning-rate reduction and early stopping.
///
/// The plateau counter resets on improvement and on each reduction; the
/// stagnation counter resets only on improvement. Stopping takes precedence
/// over a reduction falling on the same epoch.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  PlateauSchedule(std::size_t plateau_patience, std::size_t stop_patience,
                  double min_improvement = 1e-6);

  Decision observe(double score);

  double best() const noexcept { return best_; }
  std::size_t plateau_counter() const noexcept { return plateau_; }
  std::size_t stagnant_counter() const noexcept { return stagnant_; }

 private:
  std::size_t plateau_patience_;
  std::size_t stop_patience_;
  double min_improvement_;
  double best_;
  std::size_t plateau_ = 0;
  std::size_t stagnant_ = 0;
};

struct ValidationScore {
  double loss = 0.0;
  /// Dice at threshold 0.5 pooled over all validation pixels.
  double dice = 0.0;
};

using ValidationFn = std::function<ValidationScore(const PixelClassifier&)>;

ValidationScore evaluate(const PixelClassifier& net, std::span<const Sample> val_set,
                         ActivationKind act, LossKind loss);

struct TrainResult {
  PixelClassifier net;  // parameters of the best-validation epoch
  TrainHistory history;
};

/// Mini-batch Adam with plateau learning-rate reduction and early stopping on
/// validation dice. `validation` replaces the default evaluation on `val_set`.
TrainResult train(PixelClassifier net, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, ActivationKind act, LossKind loss,
                  const TrainConfig& cfg, const ValidationFn& validation = {});

}  // namespace outact
