#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "outact/error.hpp"
#include "outact/metrics.hpp"
#include "outact/nnet.hpp"

namespace outact {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
  if (batch_size < 1) throw ContractError("batch_size must be at least 1");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw ContractError("lr_factor must lie in (0, 1)");
  if (!(plateau_patience < stop_patience)) {
    throw ContractError("plateau_patience must be smaller than stop_patience");
  }
  if (max_epochs < 1) throw ContractError("max_epochs must be at least 1");
}

double TrainHistory::best_val_dice() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const EpochRecord& e : epochs) best = std::max(best, e.val_dice);
  return best;
}

PlateauSchedule::PlateauSchedule(std::size_t plateau_patience, std::size_t stop_patience,
                                 double min_improvement)
    : plateau_patience_(plateau_patience),
      stop_patience_(stop_patience),
      min_improvement_(min_improvement),
      best_(-std::numeric_limits<double>::infinity()) {}

PlateauSchedule::Decision PlateauSchedule::observe(double score) {
  Decision d;
  if (score > best_ + min_improvement_) {
    best_ = score;
    plateau_ = 0;
    stagnant_ = 0;
    d.improved = true;
    return d;
  }
  ++plateau_;
  ++stagnant_;
  if (stagnant_ >= stop_patience_) {
    d.stop = true;
  } else if (plateau_ >= plateau_patience_) {
    d.reduce_lr = true;
    plateau_ = 0;
  }
  return d;
}

ValidationScore evaluate(const PixelClassifier& net, std::span<const Sample> val_set,
                         ActivationKind act, LossKind loss) {
  if (val_set.empty()) throw ContractError("evaluate: empty validation set");
  ValidationScore score;
  std::vector<double> all_p;
  std::vector<double> all_y;
  for (const Sample& s : val_set) {
    const std::vector<double> p = predict(net, s, act);
    const std::vector<double> y = s.targets();
    score.loss += loss_value(loss, p, y);
    all_p.insert(all_p.end(), p.begin(), p.end());
    all_y.insert(all_y.end(), y.begin(), y.end());
  }
  score.loss /= static_cast<double>(val_set.size());
  score.dice = dice_at_threshold(all_p, all_y, 0.5);
  return score;
}

TrainResult train(PixelClassifier net, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, ActivationKind act, LossKind loss,
                  const TrainConfig& cfg, const ValidationFn& validation) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");

  const ValidationFn validate =
      validation ? validation
                 : ValidationFn([&](const PixelClassifier& n) {
                     return evaluate(n, val_set, act, loss);
                   });

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  AdamState adam(net.parameter_count());
  PlateauSchedule schedule(cfg.plateau_patience, cfg.stop_patience, cfg.min_improvement);
  TrainResult result{net, {}};
  double lr = cfg.learning_rate;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        const std::span<const std::size_t> idx{order.data() + start, stop - start};
        const Batch batch = make_batch(train_set, idx);
        const Gradients g = backward(net, batch, act, loss);
        if (!std::isfinite(g.loss)) throw NumericError("non-finite training loss");
        loss_sum += g.loss * static_cast<double>(idx.size());
        adam_step(net, g, adam, lr, cfg.adam);
      }
    } catch (const NumericError& e) {
      result.history.failed = true;
      result.history.failure = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.lr = lr;
    const ValidationScore score = validate(net);
    rec.val_loss = score.loss;
    rec.val_dice = score.dice;
    if (!std::isfinite(score.loss) || !std::isfinite(score.dice)) {
      result.history.failed = true;
      result.history.failure = "epoch " + std::to_string(epoch) + ": non-finite validation score";
      result.history.epochs.push_back(rec);
      break;
    }

    const PlateauSchedule::Decision d = schedule.observe(score.dice);
    rec.improved = d.improved;
    rec.plateau_counter = schedule.plateau_counter();
    rec.stagnant_counter = schedule.stagnant_counter();
    if (d.improved) {
      result.net = net;
      result.history.best_epoch = epoch;
    }
    if (d.reduce_lr) {
      lr *= cfg.lr_factor;
      rec.lr_reduced = true;
    }
    result.history.epochs.push_back(rec);
    if (d.stop) break;
  }
  return result;
}

}  // namespace outact
