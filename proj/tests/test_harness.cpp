#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "outact/error.hpp"
#include "outact/harness.hpp"

using namespace outact;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("outact_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(what); pos != std::string::npos; pos = text.find(what, pos + 1)) ++n;
  return n;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.activations = {{Activation::Sigmoid}, {Activation::Linear, RescaleScope::PerBatch}};
  c.losses = {{Loss::Bce}, {Loss::SoftDice}};
  c.k = 2;
  c.task.image_side = 8;
  c.task.n_images = 8;
  c.train.max_epochs = 4;
  c.hidden = {4};
  c.seed = 21;
  return c;
}

RunRecord rec(Activation a, Loss l, std::size_t fold, double nll, double dice) {
  RunRecord r;
  r.activation = a;
  r.loss = l;
  r.fold = fold;
  r.nll = nll;
  r.best_dice = dice;
  r.best_threshold = 0.5;
  r.gap_even = 0.1;
  r.gap_adaptive = 0.05;
  r.epochs = 12;
  return r;
}

}  // namespace

TEST_CASE("defaults cover the full grid") {
  const ExperimentConfig c = ExperimentConfig::defaults();
  CHECK(c.activations.size() == 7);
  CHECK(c.losses.size() == 3);
  CHECK(c.k == 5);
  CHECK(c.task.n_images == 200);
  CHECK(c.task.image_side == 32);
  CHECK(c.task.noise_sigma == 0.1);
  const std::vector<std::size_t> sizes = c.layer_sizes();
  CHECK(sizes.front() == 3);
  CHECK(sizes.back() == 1);
}

TEST_CASE("config files") {
  KeyValues kv;
  kv.set("activations", "sigmoid,softsign");
  kv.set("losses", "dice");
  kv.set("preset", "hard");
  kv.set("k", "3");
  kv.set("lr", "0.01");
  const ExperimentConfig c = ExperimentConfig::from_key_values(kv);
  CHECK(c.activations.size() == 2);
  CHECK(c.losses.front().tag == Loss::SoftDice);
  CHECK(c.task.noise_sigma == 1.0);
  CHECK(c.k == 3);
  CHECK(c.train.learning_rate == 0.01);

  kv.set("epochs", "3");
  CHECK_THROWS_AS(ExperimentConfig::from_key_values(kv), ContractError);
  KeyValues empty_list;
  empty_list.set("activations", "");
  CHECK_THROWS_AS(ExperimentConfig::from_key_values(empty_list), ContractError);

  for (const char* preset : {"easy", "medium", "hard"}) {
    const fs::path p = fs::path(OUTACT_SOURCE_DIR) / "configs" / (std::string(preset) + ".cfg");
    const ExperimentConfig shipped = ExperimentConfig::from_key_values(KeyValues::load(p));
    CHECK(shipped.preset == preset);
    CHECK(shipped.activations.size() * shipped.losses.size() * shipped.k == 105);
  }
}

TEST_CASE("run seeds are stable and distinct") {
  std::set<std::uint64_t> seen;
  for (Activation a : kAllActivations) {
    for (Loss l : kAllLosses) {
      for (std::size_t f = 0; f < 5; ++f) seen.insert(derive_run_seed(0, a, l, f));
    }
  }
  CHECK(seen.size() == 105);
  CHECK(derive_run_seed(1, Activation::Sigmoid, Loss::Bce, 0) ==
        derive_run_seed(1, Activation::Sigmoid, Loss::Bce, 0));
  CHECK(derive_run_seed(1, Activation::Sigmoid, Loss::Bce, 0) !=
        derive_run_seed(2, Activation::Sigmoid, Loss::Bce, 0));
}

TEST_CASE("small grid: cardinality, order, determinism and parallel equivalence") {
  ExperimentConfig c = tiny_config();
  const fs::path dir = scratch("grid");
  const GridResult a = run_grid(c, dir);
  REQUIRE(a.records.size() == 8);
  const auto sweep = threshold_sweep();
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const RunRecord& r = a.records[i];
    CHECK(r.nll >= 0.0);
    CHECK(r.best_dice >= 0.0);
    CHECK(r.best_dice <= 1.0);
    CHECK(std::find(sweep.begin(), sweep.end(), r.best_threshold) != sweep.end());
    CHECK(r.epochs >= 1);
    CHECK(r.epochs <= 4);
    if (i > 0) {
      const RunRecord& p = a.records[i - 1];
      const auto key = [](const RunRecord& x) {
        return std::tuple(static_cast<int>(x.activation), static_cast<int>(x.loss), x.fold);
      };
      CHECK(key(p) < key(r));
    }
  }
  CHECK(a.diagnostics.size() == 4);
  CHECK(count(slurp(dir / "records.partial.csv"), "\n") == 9);

  const GridResult b = run_grid(c);
  CHECK(a.records == b.records);
  c.workers = 3;
  const GridResult par = run_grid(c);
  CHECK(a.records == par.records);
}

TEST_CASE("evaluate_run on a fixed classifier") {
  TaskConfig t;
  t.image_side = 8;
  t.n_images = 3;
  t.noise_sigma = 0.2;
  const std::vector<Sample> val = generate(t);
  const std::size_t sizes[] = {3, 4, 1};
  const PixelClassifier net = init_classifier(sizes, 3);
  RunDiagnostics d;
  const RunRecord r = evaluate_run(net, val, {Activation::Sigmoid}, {Loss::Bce}, &d);
  std::vector<double> p, y;
  for (const Sample& s : val) {
    const std::vector<double> q = predict(net, s, {Activation::Sigmoid});
    p.insert(p.end(), q.begin(), q.end());
    for (std::uint8_t m : s.mask) y.push_back(m);
  }
  CHECK(r.nll == nll(p, y));
  CHECK(r.best_dice == best_threshold_dice(p, y).best_dice);
  CHECK(r.gap_even == calibration_gap(reliability(p, y, BinningStrategy::EvenlySpaced)));
  CHECK(d.even.total_count() == p.size());
  CHECK(d.kde.has_value());
}

TEST_CASE("mean and population std against a two-pass oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(2.0, 5.0);
  for (int it = 0; it < 20; ++it) {
    std::vector<double> v(1 + it);
    for (double& x : v) x = n(rng);
    const MeanStd got = mean_std(v);
    const auto [mean, sd] = oracle::mean_std(v);
    CHECK(got.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(got.std == doctest::Approx(sd).epsilon(1e-12));
  }
}

TEST_CASE("hand-computed summary for two activations and one loss") {
  const std::vector<RunRecord> records = {
      rec(Activation::Sigmoid, Loss::Bce, 0, 0.30, 0.80),
      rec(Activation::Sigmoid, Loss::Bce, 1, 0.10, 0.90),
      rec(Activation::Softsign, Loss::Bce, 0, 0.20, 0.70),
      rec(Activation::Softsign, Loss::Bce, 1, 0.10, 0.75),
  };
  const SummaryTables t = summarize(records, "easy");
  REQUIRE(t.combinations.size() == 2);
  const CombinationSummary& sig = t.combinations[0];
  const CombinationSummary& soft = t.combinations[1];
  CHECK(sig.activation == Activation::Sigmoid);
  CHECK(sig.nll.mean == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(sig.nll.std == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(sig.dice.mean == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(soft.nll.mean == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(soft.dice.std == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(soft.best_nll);
  CHECK(sig.worst_nll);
  CHECK(sig.best_dice);
  CHECK(soft.worst_dice);
  REQUIRE(t.sigmoid_wins.size() == 1);
  CHECK(t.sigmoid_wins[0].won_nll == 1);
  CHECK(t.sigmoid_wins[0].won_dice == 0);
  CHECK(t.sigmoid_wins[0].sum == 1);
  REQUIRE(t.loss_wins.size() == 1);
  CHECK(t.loss_wins[0].won_nll == 2);
  CHECK(t.loss_wins[0].won_dice == 2);
  CHECK(t.warnings.empty());
  CHECK(summarize(records, "easy") == t);
}

TEST_CASE("sigmoid dominating every metric gives no wins") {
  std::vector<RunRecord> records;
  for (Activation a : kAllActivations) {
    for (Loss l : kAllLosses) {
      for (std::size_t f = 0; f < 3; ++f) {
        const bool sig = a == Activation::Sigmoid;
        records.push_back(rec(a, l, f, sig ? 0.1 : 0.5 + 0.01 * f, sig ? 0.95 : 0.6));
      }
    }
  }
  const SummaryTables t = summarize(records);
  CHECK(t.sigmoid_wins.size() == 6);
  for (const SigmoidWins& w : t.sigmoid_wins) {
    CHECK(w.won_nll == 0);
    CHECK(w.won_dice == 0);
    CHECK(w.sum == 0);
  }
  CHECK(t.combinations.size() == 21);
  for (const CombinationSummary& c : t.combinations) {
    std::vector<double> folds;
    for (const RunRecord& r : records) {
      if (r.activation == c.activation && r.loss == c.loss) folds.push_back(r.nll);
    }
    CHECK(std::fabs(c.nll.mean - oracle::mean_std(folds).first) <= 1e-12);
  }
  REQUIRE(t.dice_loss_nll.size() == 1);
  CHECK(t.dice_loss_nll[0].activations.size() == 5);
  CHECK(t.dice_loss_nll[0].not_decreasing ==
        std::vector<bool>{false, false, true, true, true});
}

TEST_CASE("incomplete combinations are dropped with a warning") {
  std::vector<RunRecord> records = {
      rec(Activation::Sigmoid, Loss::Bce, 0, 0.3, 0.8),
      rec(Activation::Sigmoid, Loss::Bce, 1, 0.3, 0.8),
      rec(Activation::Arctangent, Loss::Bce, 0, 0.2, 0.9),
  };
  const SummaryTables t = summarize(records);
  CHECK(t.combinations.size() == 1);
  REQUIRE(t.warnings.size() == 1);
  CHECK(t.warnings[0].find("arctangent") != std::string::npos);
}

TEST_CASE("several presets") {
  std::vector<PresetRecords> groups;
  for (const char* name : {"easy", "hard"}) {
    PresetRecords g{name, {}};
    for (std::size_t f = 0; f < 2; ++f) {
      g.records.push_back(rec(Activation::Sigmoid, Loss::Bce, f, 0.3, 0.8));
      g.records.push_back(rec(Activation::Sigmoid, Loss::Mse, f, 0.2, 0.7));
      g.records.push_back(rec(Activation::NormalCdf, Loss::Bce, f, 0.25, 0.9));
      g.records.push_back(rec(Activation::NormalCdf, Loss::Mse, f, 0.4, std::string(name) == "easy" ? 0.6 : 0.95));
    }
    groups.push_back(std::move(g));
  }
  const SummaryTables t = summarize(groups);
  CHECK(t.presets == std::vector<std::string>{"easy", "hard"});
  REQUIRE(t.sigmoid_wins.size() == 1);
  CHECK(t.sigmoid_wins[0].won_nll == 0);
  CHECK(t.sigmoid_wins[0].won_dice == 2);
  const auto cdf_mse = std::find_if(t.average_dice.begin(), t.average_dice.end(), [](const AverageDice& a) {
    return a.activation == Activation::NormalCdf && a.loss == Loss::Mse;
  });
  REQUIRE(cdf_mse != t.average_dice.end());
  CHECK(cdf_mse->mean_dice == doctest::Approx((0.6 + 0.95) / 2.0));
  CHECK(cdf_mse->presets == 2);
}

TEST_CASE("records CSV and summary JSON round-trip") {
  std::vector<RunRecord> records;
  for (Activation a : {Activation::Sigmoid, Activation::HardTanh}) {
    for (std::size_t f = 0; f < 3; ++f) {
      RunRecord r = rec(a, Loss::Mse, f, 0.1 + 0.013 * static_cast<double>(f), 1.0 / 3.0);
      r.converged = f != 1;
      records.push_back(r);
    }
  }
  records.back().gap_adaptive = std::nan("");
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  write_records_csv(dir / "r.csv", records);
  const std::string text = slurp(dir / "r.csv");
  CHECK(text.rfind("activation,loss,fold,nll,dice,threshold,gap_even,gap_adaptive,epochs,converged\n", 0) == 0);
  CHECK(count(text, "\n") == records.size() + 1);
  const std::vector<RunRecord> back = read_records_csv(dir / "r.csv");
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i + 1 < back.size(); ++i) CHECK(back[i] == records[i]);
  CHECK(std::isnan(back.back().gap_adaptive));

  records.back().gap_adaptive = 0.2;
  const SummaryTables t = summarize(records);
  CHECK(summary_from_json(nlohmann::json::parse(to_json(t).dump())) == t);
  CHECK(format_tables(t).find("hardtanh") != std::string::npos);
}

TEST_CASE("report files and completion marker") {
  ExperimentConfig c = tiny_config();
  c.activations = {{Activation::Sigmoid}, {Activation::NormalCdf}, {Activation::Softsign}};
  c.losses = {{Loss::Bce}};
  const GridResult g = run_grid(c);
  const SummaryTables t = summarize(g.records);
  const fs::path dir = scratch("report");
  const std::vector<fs::path> files = emit_report(g.records, t, dir, g.diagnostics);
  CHECK(fs::exists(dir / kReportMarker));
  for (const char* name : {"records.csv", "summary.json", "tables.txt", "activations.svg",
                           "loss_bce.svg", "loss_mse.svg", "loss_dice.svg"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / name));
  }
  CHECK(count(slurp(dir / "activations.svg"), "<path") == 7);
  CHECK(slurp(dir / "activations.svg").find("stroke-dasharray") != std::string::npos);
  CHECK(count(slurp(dir / "records.csv"), "\n") == g.records.size() + 1);
  CHECK(std::find(files.begin(), files.end(), dir / "kde_bce.svg") != files.end());
  CHECK(std::find(files.begin(), files.end(), dir / "reliability_adaptive.svg") != files.end());

  std::ifstream js(dir / "summary.json");
  CHECK(summary_from_json(nlohmann::json::parse(js)) == t);

  const nlohmann::json dj = diagnostics_to_json(g.diagnostics);
  const std::vector<RunDiagnostics> back = diagnostics_from_json(nlohmann::json::parse(dj.dump()));
  REQUIRE(back.size() == g.diagnostics.size());
  CHECK(back[0].even.total_count() == g.diagnostics[0].even.total_count());
  CHECK(back[0].kde.has_value() == g.diagnostics[0].kde.has_value());
}
