#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "outact/datagen.hpp"
#include "outact/error.hpp"
#include "outact/metrics.hpp"
#include "outact/nnet.hpp"

using namespace outact;

namespace {

std::vector<Sample> small_task(std::size_t n, std::uint64_t seed, double sigma = 0.1) {
  TaskConfig t;
  t.image_side = 16;
  t.n_images = n;
  t.noise_sigma = sigma;
  t.seed = seed;
  return generate(t);
}

// Points in [-1, 1]^2 labelled by the line x + 2y > 0.3.
std::vector<Sample> separable_task(std::size_t images, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Sample> out;
  for (std::size_t k = 0; k < images; ++k) {
    Sample s;
    s.features.resize(100, 2);
    s.mask.resize(100);
    std::size_t fg = 0;
    for (Eigen::Index i = 0; i < 100; ++i) {
      const double x = u(rng), y = u(rng);
      s.features(i, 0) = x;
      s.features(i, 1) = y;
      s.mask[static_cast<std::size_t>(i)] = x + 2.0 * y > 0.3;
      fg += s.mask[static_cast<std::size_t>(i)];
    }
    s.foreground_fraction = static_cast<double>(fg) / 100.0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("plateau schedule with a constant score") {
  PlateauSchedule s(5, 10);
  std::vector<std::size_t> reductions;
  std::size_t stop_at = 0;
  for (std::size_t epoch = 1; epoch <= 30 && !stop_at; ++epoch) {
    const PlateauSchedule::Decision d = s.observe(0.7);
    CHECK(d.improved == (epoch == 1));
    if (d.reduce_lr) reductions.push_back(epoch);
    if (d.stop) stop_at = epoch;
  }
  CHECK(stop_at == 11);
  CHECK(reductions == std::vector<std::size_t>{6});
}

TEST_CASE("plateau schedule counters") {
  PlateauSchedule s(2, 4);
  CHECK(s.observe(0.5).improved);
  CHECK_FALSE(s.observe(0.5 + 1e-7).improved);  // within min_improvement
  CHECK(s.observe(0.5).reduce_lr);
  CHECK(s.plateau_counter() == 0);
  CHECK(s.stagnant_counter() == 2);
  CHECK(s.observe(0.6).improved);
  CHECK(s.stagnant_counter() == 0);
  CHECK(s.best() == 0.6);
  CHECK_FALSE(s.observe(0.1).reduce_lr);
  CHECK(s.observe(0.1).reduce_lr);
  CHECK_FALSE(s.observe(0.1).reduce_lr);
  const PlateauSchedule::Decision d = s.observe(0.1);
  CHECK(d.stop);
  CHECK_FALSE(d.reduce_lr);  // stopping wins over a reduction on the same epoch
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr_factor = 1.0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.plateau_patience = 10;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("constant validation dice: eleven epochs, one reduction") {
  const std::vector<Sample> data = small_task(4, 1);
  TrainConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.lr_factor = 0.5;
  const std::size_t sizes[] = {3, 4, 1};
  const TrainResult r =
      train(init_classifier(sizes, 2), std::span(data).first(3), std::span(data).last(1),
            {Activation::Sigmoid}, {Loss::Mse}, cfg,
            [](const PixelClassifier&) { return ValidationScore{0.2, 0.4}; });
  REQUIRE(r.history.epochs.size() == 11);
  CHECK(r.history.best_epoch == 1);
  for (const EpochRecord& e : r.history.epochs) {
    CHECK(e.lr_reduced == (e.epoch == 6));
    CHECK(e.lr == (e.epoch <= 6 ? 2e-3 : 1e-3));
  }
}

TEST_CASE("training is deterministic and restores the best epoch") {
  const std::vector<Sample> data = small_task(12, 4, 0.5);
  const std::span<const Sample> tr = std::span(data).first(9);
  const std::span<const Sample> va = std::span(data).last(3);
  TrainConfig cfg;
  cfg.max_epochs = 25;
  cfg.seed = 17;
  const std::size_t sizes[] = {3, 8, 8, 1};
  const TrainResult a = train(init_classifier(sizes, 5), tr, va, {Activation::Arctangent},
                              {Loss::SoftDice}, cfg);
  const TrainResult b = train(init_classifier(sizes, 5), tr, va, {Activation::Arctangent},
                              {Loss::SoftDice}, cfg);
  CHECK(a.history == b.history);
  CHECK(flatten(a.net) == flatten(b.net));
  CHECK_FALSE(a.history.failed);
  CHECK(a.history.epochs.size() <= cfg.max_epochs);

  const ValidationScore best = evaluate(a.net, va, {Activation::Arctangent}, {Loss::SoftDice});
  CHECK(std::fabs(best.dice - a.history.best_val_dice()) <= 1e-12);

  double prev = cfg.learning_rate;
  for (const EpochRecord& e : a.history.epochs) {
    CHECK(e.lr == prev);
    prev = e.lr_reduced ? e.lr * cfg.lr_factor : e.lr;
  }
}

TEST_CASE("a linearly separable task is learned") {
  const std::vector<Sample> data = separable_task(200, 8);
  TrainConfig cfg;
  cfg.seed = 3;
  const std::size_t sizes[] = {2, 8, 1};
  const TrainResult r = train(init_classifier(sizes, 11), std::span(data).first(160),
                              std::span(data).last(40), {Activation::Sigmoid}, {Loss::Bce}, cfg);
  CHECK(r.history.best_val_dice() >= 0.95);
}

TEST_CASE("non-finite inputs flag the run as failed") {
  std::vector<Sample> data = small_task(4, 2);
  data[0].features(0, 2) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 4;
  const std::size_t sizes[] = {3, 4, 1};
  const TrainResult r = train(init_classifier(sizes, 1), std::span(data).first(3),
                              std::span(data).last(1), {Activation::Sigmoid}, {Loss::Bce}, cfg);
  CHECK(r.history.failed);
  CHECK_FALSE(r.history.failure.empty());
  CHECK(r.history.epochs.empty());
}

TEST_CASE("evaluate averages per-image losses and pools dice") {
  const std::vector<Sample> data = small_task(3, 6, 0.3);
  const std::size_t sizes[] = {3, 5, 1};
  const PixelClassifier net = init_classifier(sizes, 4);
  const ValidationScore s = evaluate(net, data, {Activation::Sigmoid}, {Loss::Bce});
  double loss = 0.0;
  std::vector<double> p, y;
  for (const Sample& x : data) {
    const std::vector<double> q = predict(net, x, {Activation::Sigmoid});
    loss += nll(q, x.targets());
    p.insert(p.end(), q.begin(), q.end());
    const std::vector<double> t = x.targets();
    y.insert(y.end(), t.begin(), t.end());
  }
  CHECK(s.loss == doctest::Approx(loss / 3.0).epsilon(1e-14));
  CHECK(s.dice == dice_at_threshold(p, y, 0.5));
  CHECK_THROWS_AS(evaluate(net, {}, {Activation::Sigmoid}, {Loss::Bce}), ContractError);
}
