#include "outact/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "outact/error.hpp"

namespace outact {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::size_t index_of(Activation a) { return static_cast<std::size_t>(a); }
std::size_t index_of(Loss l) { return static_cast<std::size_t>(l); }

bool record_less(const RunRecord& a, const RunRecord& b) {
  if (a.activation != b.activation) return index_of(a.activation) < index_of(b.activation);
  if (a.loss != b.loss) return index_of(a.loss) < index_of(b.loss);
  return a.fold < b.fold;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  for (Activation a : kAllActivations) {
    c.activations.push_back({a, a == Activation::Linear ? RescaleScope::PerBatch
                                                        : RescaleScope::PerImage});
  }
  for (Loss l : kAllLosses) c.losses.push_back({l});
  c.task.noise_sigma = preset_noise(c.preset);
  return c;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  kv.require_known({"activations", "losses", "preset", "shape", "image_side", "n_images",
                    "noise_sigma", "seed", "k", "lr", "batch_size", "plateau_patience",
                    "stop_patience", "lr_factor", "max_epochs", "hidden", "workers"});
  ExperimentConfig c = defaults();
  if (kv.has("activations")) {
    c.activations.clear();
    for (const std::string& name : kv.get_list("activations", {})) {
      const Activation a = parse_activation(name);
      c.activations.push_back(
          {a, a == Activation::Linear ? RescaleScope::PerBatch : RescaleScope::PerImage});
    }
  }
  if (kv.has("losses")) {
    c.losses.clear();
    for (const std::string& name : kv.get_list("losses", {})) c.losses.push_back({parse_loss(name)});
  }
  c.preset = kv.get_string("preset", c.preset);
  c.task.noise_sigma = kv.get_double("noise_sigma", preset_noise(c.preset));
  c.task.shape = parse_shape(kv.get_string("shape", std::string(to_string(c.task.shape))));
  c.task.image_side = kv.get_size("image_side", c.task.image_side);
  c.task.n_images = kv.get_size("n_images", c.task.n_images);
  c.seed = kv.get_u64("seed", c.seed);
  c.task.seed = c.seed;
  c.k = kv.get_size("k", c.k);
  c.train.learning_rate = kv.get_double("lr", c.train.learning_rate);
  c.train.batch_size = kv.get_size("batch_size", c.train.batch_size);
  c.train.plateau_patience = kv.get_size("plateau_patience", c.train.plateau_patience);
  c.train.stop_patience = kv.get_size("stop_patience", c.train.stop_patience);
  c.train.lr_factor = kv.get_double("lr_factor", c.train.lr_factor);
  c.train.max_epochs = kv.get_size("max_epochs", c.train.max_epochs);
  c.hidden = kv.get_size_list("hidden", c.hidden);
  c.workers = kv.get_size("workers", c.workers);
  c.validate();
  return c;
}

std::vector<std::size_t> ExperimentConfig::layer_sizes() const {
  std::vector<std::size_t> sizes{TaskConfig::kFeatureDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void ExperimentConfig::validate() const {
  if (activations.empty()) throw ContractError("experiment needs at least one activation");
  if (losses.empty()) throw ContractError("experiment needs at least one loss");
  if (k < 2) throw ContractError("experiment needs k >= 2 folds");
  if (task.n_images < k) throw ContractError("n_images must be at least k");
  if (workers < 1) throw ContractError("workers must be at least 1");
  for (std::size_t w : hidden) {
    if (w == 0) throw ContractError("hidden layer widths must be positive");
  }
  task.validate();
  train.validate();
}

std::uint64_t derive_run_seed(std::uint64_t base, Activation act, Loss loss, std::size_t fold) {
  std::uint64_t h = fnv1a(0xcbf29ce484222325ull, "outact-run");
  h = splitmix64(h ^ base);
  h = splitmix64(fnv1a(h, to_string(act)));
  h = splitmix64(fnv1a(h, to_string(loss)));
  return splitmix64(h ^ static_cast<std::uint64_t>(fold));
}

RunRecord evaluate_run(const PixelClassifier& net, std::span<const Sample> val_set,
                       ActivationKind act, LossKind loss, RunDiagnostics* diagnostics) {
  if (val_set.empty()) throw ContractError("evaluate_run: empty validation set");
  std::vector<double> p;
  std::vector<double> y;
  for (const Sample& s : val_set) {
    const std::vector<double> ps = predict(net, s, act);
    p.insert(p.end(), ps.begin(), ps.end());
    y.insert(y.end(), s.mask.begin(), s.mask.end());
  }
  RunRecord r;
  r.activation = act.tag;
  r.loss = loss.tag;
  r.nll = nll(p, y);
  const DiceSweepResult sweep = best_threshold_dice(p, y);
  r.best_dice = sweep.best_dice;
  r.best_threshold = sweep.best_threshold;

  ReliabilityDiagram even = reliability(p, y, BinningStrategy::EvenlySpaced);
  r.gap_even = calibration_gap(even);
  std::optional<ReliabilityDiagram> adaptive;
  try {
    adaptive = reliability(p, y, BinningStrategy::Adaptive);
    r.gap_adaptive = calibration_gap(*adaptive);
  } catch (const EmptyDiagramError&) {
    r.gap_adaptive = kNaN;
  }

  if (diagnostics) {
    diagnostics->activation = act.tag;
    diagnostics->loss = loss.tag;
    diagnostics->even = std::move(even);
    diagnostics->adaptive = std::move(adaptive);
    try {
      diagnostics->kde = kde_conditional(p, y);
    } catch (const ContractError&) {
      diagnostics->kde.reset();
    }
  }
  return r;
}

GridResult run_grid(const ExperimentConfig& cfg,
                    const std::optional<std::filesystem::path>& log_dir) {
  cfg.validate();
  TaskConfig task = cfg.task;
  task.seed = cfg.seed;
  const std::vector<Sample> data = generate(task);
  const std::vector<Fold> folds = kfold_split(data.size(), cfg.k, splitmix64(cfg.seed ^ 0x5eedf01dull));

  std::vector<std::vector<Sample>> train_sets(cfg.k);
  std::vector<std::vector<Sample>> val_sets(cfg.k);
  for (std::size_t f = 0; f < cfg.k; ++f) {
    for (std::size_t i : folds[f].train) train_sets[f].push_back(data[i]);
    for (std::size_t i : folds[f].val) val_sets[f].push_back(data[i]);
  }

  struct Cell {
    ActivationKind act;
    LossKind loss;
    std::size_t fold;
  };
  std::vector<Cell> cells;
  for (const ActivationKind& a : cfg.activations) {
    for (const LossKind& l : cfg.losses) {
      for (std::size_t f = 0; f < cfg.k; ++f) cells.push_back({a, l, f});
    }
  }

  std::ofstream log;
  if (log_dir) {
    std::filesystem::create_directories(*log_dir);
    log.open(*log_dir / "records.partial.csv", std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write records.partial.csv in " + log_dir->string());
    log << records_csv_header() << '\n' << std::flush;
  }

  const std::vector<std::size_t> sizes = cfg.layer_sizes();
  std::vector<RunRecord> records(cells.size());
  std::vector<std::optional<RunDiagnostics>> diags(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex writer;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard lock(writer);
        if (failure) return;
      }
      try {
        const Cell& c = cells[i];
        const std::uint64_t seed = derive_run_seed(cfg.seed, c.act.tag, c.loss.tag, c.fold);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        TrainResult trained = train(init_classifier(sizes, seed), train_sets[c.fold],
                                    val_sets[c.fold], c.act, c.loss, tc);
        RunDiagnostics d;
        RunRecord r = evaluate_run(trained.net, val_sets[c.fold], c.act, c.loss,
                                   c.fold == 0 ? &d : nullptr);
        r.fold = c.fold;
        r.epochs = trained.history.epochs.size();
        r.converged = !trained.history.failed;
        if (trained.history.failed) {
          spdlog::warn("{} + {} fold {} failed to converge: {}", to_string(c.act.tag),
                       to_string(c.loss.tag), c.fold, trained.history.failure);
        }
        records[i] = r;
        if (c.fold == 0) {
          d.fold = 0;
          diags[i] = std::move(d);
        }
        std::lock_guard lock(writer);
        if (log.is_open()) {
          log << records_csv_row(r) << '\n' << std::flush;
          if (!log) throw std::runtime_error("write to records.partial.csv failed");
        }
        spdlog::info("{} + {} fold {}: dice {:.4f} nll {:.4f} ({} epochs)",
                     to_string(c.act.tag), to_string(c.loss.tag), c.fold, r.best_dice, r.nll,
                     r.epochs);
      } catch (...) {
        std::lock_guard lock(writer);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_threads = std::min(cfg.workers, cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  GridResult result;
  result.records = std::move(records);
  std::sort(result.records.begin(), result.records.end(), record_less);
  for (auto& d : diags) {
    if (d) result.diagnostics.push_back(std::move(*d));
  }
  std::sort(result.diagnostics.begin(), result.diagnostics.end(),
            [](const RunDiagnostics& a, const RunDiagnostics& b) {
              if (a.activation != b.activation) return index_of(a.activation) < index_of(b.activation);
              return index_of(a.loss) < index_of(b.loss);
            });
  return result;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {kNaN, kNaN};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

SummaryTables summarize(std::span<const RunRecord> records, const std::string& preset) {
  const PresetRecords group{preset, {records.begin(), records.end()}};
  return summarize(std::span<const PresetRecords>(&group, 1));
}

SummaryTables summarize(std::span<const PresetRecords> groups) {
  SummaryTables t;
  using Key = std::pair<std::size_t, std::size_t>;  // (activation, loss)

  std::map<Activation, SigmoidWins> sig_wins;
  std::map<Loss, LossWins> loss_wins;
  std::map<Key, std::vector<double>> dice_by_combo;  // fold-mean dice per preset

  for (const PresetRecords& g : groups) {
    t.presets.push_back(g.preset);
    std::size_t max_fold = 0;
    std::map<Key, std::vector<const RunRecord*>> by_combo;
    for (const RunRecord& r : g.records) {
      by_combo[{index_of(r.activation), index_of(r.loss)}].push_back(&r);
      max_fold = std::max(max_fold, r.fold);
    }
    const std::size_t k = max_fold + 1;

    std::vector<CombinationSummary> combos;
    for (auto& [key, rs] : by_combo) {
      std::vector<bool> seen(k, false);
      for (const RunRecord* r : rs) seen[r->fold] = true;
      const bool complete = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }) &&
                            rs.size() == k;
      const Activation act = rs.front()->activation;
      const Loss loss = rs.front()->loss;
      if (!complete) {
        const std::string msg = "preset " + g.preset + ": " + std::string(to_string(act)) +
                                " + " + std::string(to_string(loss)) +
                                " excluded, fold set incomplete";
        spdlog::warn("{}", msg);
        t.warnings.push_back(msg);
        continue;
      }
      std::vector<const RunRecord*> sorted = rs;
      std::sort(sorted.begin(), sorted.end(),
                [](const RunRecord* a, const RunRecord* b) { return a->fold < b->fold; });
      std::vector<double> nll_v, dice_v, ge_v, ga_v;
      CombinationSummary c;
      c.preset = g.preset;
      c.activation = act;
      c.loss = loss;
      c.folds = k;
      for (const RunRecord* r : sorted) {
        nll_v.push_back(r->nll);
        dice_v.push_back(r->best_dice);
        ge_v.push_back(r->gap_even);
        ga_v.push_back(r->gap_adaptive);
        c.converged_folds += r->converged ? 1 : 0;
      }
      c.nll = mean_std(nll_v);
      c.dice = mean_std(dice_v);
      c.gap_even = mean_std(ge_v);
      c.gap_adaptive = mean_std(ga_v);
      combos.push_back(c);
    }
    if (combos.empty()) continue;

    // Best / worst flags within the preset.
    auto flag = [&](auto metric, bool lower_is_better, bool CombinationSummary::*best,
                    bool CombinationSummary::*worst) {
      std::size_t ib = 0, iw = 0;
      for (std::size_t i = 1; i < combos.size(); ++i) {
        const double v = metric(combos[i]);
        if (lower_is_better ? v < metric(combos[ib]) : v > metric(combos[ib])) ib = i;
        if (lower_is_better ? v > metric(combos[iw]) : v < metric(combos[iw])) iw = i;
      }
      combos[ib].*best = true;
      combos[iw].*worst = true;
    };
    flag([](const CombinationSummary& c) { return c.nll.mean; }, true,
         &CombinationSummary::best_nll, &CombinationSummary::worst_nll);
    flag([](const CombinationSummary& c) { return c.dice.mean; }, false,
         &CombinationSummary::best_dice, &CombinationSummary::worst_dice);

    // Best over losses per activation.
    std::map<Activation, double> best_nll, best_dice;
    std::map<Activation, std::vector<const CombinationSummary*>> by_act;
    for (const CombinationSummary& c : combos) {
      by_act[c.activation].push_back(&c);
      auto [it_n, new_n] = best_nll.emplace(c.activation, c.nll.mean);
      if (!new_n) it_n->second = std::min(it_n->second, c.nll.mean);
      auto [it_d, new_d] = best_dice.emplace(c.activation, c.dice.mean);
      if (!new_d) it_d->second = std::max(it_d->second, c.dice.mean);
      dice_by_combo[{index_of(c.activation), index_of(c.loss)}].push_back(c.dice.mean);
      loss_wins[c.loss].loss = c.loss;
    }
    if (best_nll.contains(Activation::Sigmoid)) {
      for (const auto& [act, v] : best_nll) {
        if (act == Activation::Sigmoid) continue;
        SigmoidWins& w = sig_wins[act];
        w.activation = act;
        if (v < best_nll[Activation::Sigmoid]) ++w.won_nll;
        if (best_dice[act] > best_dice[Activation::Sigmoid]) ++w.won_dice;
      }
    }

    // Loss wins per (activation, preset) cell; ties go to the earlier loss.
    for (auto& [act, cs] : by_act) {
      std::sort(cs.begin(), cs.end(), [](const CombinationSummary* a, const CombinationSummary* b) {
        return index_of(a->loss) < index_of(b->loss);
      });
      const CombinationSummary* bn = cs.front();
      const CombinationSummary* bd = cs.front();
      for (const CombinationSummary* c : cs) {
        if (c->nll.mean < bn->nll.mean) bn = c;
        if (c->dice.mean > bd->dice.mean) bd = c;
      }
      loss_wins[bn->loss].loss = bn->loss;
      ++loss_wins[bn->loss].won_nll;
      loss_wins[bd->loss].loss = bd->loss;
      ++loss_wins[bd->loss].won_dice;
    }

    // Dice-loss NLL in effective-domain order.
    DiceLossNllRow row;
    row.preset = g.preset;
    for (Activation a : kSmoothActivations) {
      const auto it = std::find_if(combos.begin(), combos.end(), [&](const CombinationSummary& c) {
        return c.activation == a && c.loss == Loss::SoftDice;
      });
      if (it == combos.end()) continue;
      row.activations.push_back(a);
      row.not_decreasing.push_back(!row.nll.empty() && it->nll.mean >= row.nll.back());
      row.nll.push_back(it->nll.mean);
    }
    if (!row.activations.empty()) t.dice_loss_nll.push_back(std::move(row));

    t.combinations.insert(t.combinations.end(), combos.begin(), combos.end());
  }

  for (auto& [act, w] : sig_wins) {
    w.sum = w.won_nll + w.won_dice;
    t.sigmoid_wins.push_back(w);
  }
  for (auto& [loss, w] : loss_wins) {
    w.sum = w.won_nll + w.won_dice;
    t.loss_wins.push_back(w);
  }
  for (const auto& [key, values] : dice_by_combo) {
    AverageDice a;
    a.activation = static_cast<Activation>(key.first);
    a.loss = static_cast<Loss>(key.second);
    a.presets = values.size();
    a.mean_dice = mean_std(values).mean;
    t.average_dice.push_back(a);
  }
  return t;
}

}  // namespace outact
