#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "outact/activations.hpp"
#include "outact/binary_io.hpp"
#include "outact/config.hpp"
#include "outact/datagen.hpp"
#include "outact/error.hpp"
#include "outact/harness.hpp"
#include "outact/losses.hpp"
#include "outact/metrics.hpp"
#include "outact/nnet.hpp"

namespace fs = std::filesystem;
using namespace outact;

namespace {

std::vector<double> load_numbers(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") return load_csv_array(path);
  return load_f64_array(path);
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':', text.front() == '-' ? 1 : 0);
  if (colon == std::string::npos) throw ContractError("range must look like lo:hi");
  const double lo = std::stod(text.substr(0, colon));
  const double hi = std::stod(text.substr(colon + 1));
  if (!(lo < hi)) throw ContractError("range needs lo < hi");
  return {lo, hi};
}

int cmd_domains(double epsilon, const std::string& format) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ContractError("epsilon must lie in (0, 0.5)");
  if (format == "csv") {
    std::cout << "name,lo,hi,epsilon\n";
  } else {
    std::cout << std::left << std::setw(22) << "name" << std::setw(10) << "f(0)" << std::setw(10)
              << "f'(0)" << "domain\n";
  }
  for (Activation a : kAllActivations) {
    const RescaleContext unit{-1.0, 1.0};
    const EffectiveDomain d = effective_domain({a}, epsilon, unit);
    if (format == "csv") {
      std::cout << to_string(a) << ',' << d.lo << ',' << d.hi << ',' << epsilon << '\n';
      continue;
    }
    std::ostringstream dom;
    if (a == Activation::Linear) {
      dom << "[x_min, x_max]";
    } else {
      dom << '[' << d.lo << ", " << d.hi << ']';
    }
    std::cout << std::setw(22) << display_name(a) << std::setw(10) << std::setprecision(4)
              << activate({a}, 0.0, unit) << std::setw(10) << activate_derivative({a}, 0.0, unit)
              << dom.str() << '\n';
  }
  return 0;
}

int cmd_losscurve(const std::string& loss, const std::string& activation,
                  const std::string& range, const fs::path& out) {
  const auto [lo, hi] = parse_range(range);
  std::vector<Activation> acts;
  if (activation == "all") {
    acts.assign(kAllActivations.begin(), kAllActivations.end());
  } else {
    acts.push_back(parse_activation(activation));
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  plot_loss_curves(out, parse_loss(loss), acts, lo, hi);
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_datagen(const fs::path& config, const fs::path& out) {
  const ExperimentConfig cfg = ExperimentConfig::from_key_values(KeyValues::load(config));
  const std::vector<Sample> samples = generate(cfg.task);
  write_dataset(out, cfg.task, samples);
  std::cout << "wrote " << samples.size() << " images to " << out.string() << '\n';
  return 0;
}

int cmd_train(const std::string& activation, const std::string& loss,
              std::optional<std::uint64_t> seed, const std::optional<fs::path>& config,
              const fs::path& out, const std::optional<fs::path>& data) {
  ExperimentConfig cfg = config ? ExperimentConfig::from_key_values(KeyValues::load(*config))
                                : ExperimentConfig::defaults();
  if (seed) cfg.seed = *seed;
  cfg.task.seed = cfg.seed;
  cfg.validate();

  const std::vector<Sample> samples = data ? load_samples(*data / "samples.actd") : generate(cfg.task);
  const std::vector<Fold> folds = kfold_split(samples.size(), cfg.k, cfg.seed);
  std::vector<Sample> train_set, val_set;
  for (std::size_t i : folds.front().train) train_set.push_back(samples[i]);
  for (std::size_t i : folds.front().val) val_set.push_back(samples[i]);

  ActivationKind act{parse_activation(activation)};
  if (act.tag == Activation::Linear) act.scope = RescaleScope::PerBatch;
  const LossKind lk{parse_loss(loss)};
  TrainConfig tc = cfg.train;
  tc.seed = derive_run_seed(cfg.seed, act.tag, lk.tag, 0);
  const std::vector<std::size_t> sizes = cfg.layer_sizes();
  const TrainResult result =
      train(init_classifier(sizes, tc.seed), train_set, val_set, act, lk, tc);

  fs::create_directories(out);
  std::ofstream hist(out / "history.csv");
  hist << "epoch,train_loss,val_loss,val_dice,lr\n" << std::setprecision(17);
  for (const EpochRecord& e : result.history.epochs) {
    hist << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_dice << ',' << e.lr
         << '\n';
  }
  if (!hist) throw std::runtime_error("cannot write history.csv");
  save_classifier(out / "params.acts", result.net);
  std::cout << "epochs " << result.history.epochs.size() << ", best epoch "
            << result.history.best_epoch << ", best val dice " << result.history.best_val_dice()
            << '\n';
  if (result.history.failed) {
    std::cerr << "training failed: " << result.history.failure << '\n';
    return 2;
  }
  return 0;
}

int cmd_metrics(const fs::path& pred, const fs::path& truth,
                const std::optional<fs::path>& plots) {
  std::vector<double> p = load_numbers(pred);
  const std::vector<double> y = load_numbers(truth);
  if (p.size() != y.size()) throw ContractError("pred and truth differ in length");
  for (double& v : p) v = clamp_probability(v);

  nlohmann::json j;
  j["count"] = p.size();
  j["nll"] = nll(p, y);
  const DiceSweepResult sweep = best_threshold_dice(p, y);
  j["best_threshold"] = sweep.best_threshold;
  j["best_dice"] = sweep.best_dice;
  for (std::size_t k = 0; k < kThresholdCount; ++k) {
    j["dice_sweep"].push_back({{"threshold", sweep.thresholds[k]}, {"dice", sweep.dice[k]}});
  }
  const ReliabilityDiagram even = reliability(p, y, BinningStrategy::EvenlySpaced);
  j["gap_even"] = calibration_gap(even);
  std::optional<ReliabilityDiagram> adaptive;
  try {
    adaptive = reliability(p, y, BinningStrategy::Adaptive);
    j["gap_adaptive"] = calibration_gap(*adaptive);
  } catch (const EmptyDiagramError&) {
    j["gap_adaptive"] = nullptr;
  }

  if (plots) {
    fs::create_directories(*plots);
    const std::vector<std::string> label{"predictions"};
    plot_reliability(*plots / "reliability_evenly_spaced.svg", "Reliability (evenly spaced)",
                     std::span(&even, 1), label);
    if (adaptive) {
      plot_reliability(*plots / "reliability_adaptive.svg", "Reliability (adaptive)",
                       std::span(&*adaptive, 1), label);
    }
    bool any_positive = false;
    for (double v : y) any_positive = any_positive || v > 0.5;
    if (any_positive) {
      const DensityCurve kde = kde_conditional(p, y);
      plot_densities(*plots / "kde.svg", "Density of predictions with y = 1", std::span(&kde, 1),
                     label);
    }
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_grid(const fs::path& config, const fs::path& out, std::optional<std::size_t> workers) {
  ExperimentConfig cfg = ExperimentConfig::from_key_values(KeyValues::load(config));
  if (workers) cfg.workers = *workers;
  cfg.validate();
  fs::create_directories(out);
  const GridResult grid = run_grid(cfg, out);
  {
    std::ofstream d(out / "diagnostics.json");
    d << diagnostics_to_json(grid.diagnostics).dump() << '\n';
  }
  const SummaryTables tables = summarize(grid.records, cfg.preset);
  emit_report(grid.records, tables, out, grid.diagnostics);
  std::cout << format_tables(tables);
  return 0;
}

int cmd_report(const std::vector<fs::path>& records, const std::vector<std::string>& presets,
               const fs::path& out, const std::optional<fs::path>& diagnostics) {
  std::vector<PresetRecords> groups;
  std::vector<RunRecord> all;
  for (std::size_t i = 0; i < records.size(); ++i) {
    PresetRecords g;
    g.preset = i < presets.size() ? presets[i] : records[i].parent_path().filename().string();
    if (g.preset.empty()) g.preset = "preset" + std::to_string(i);
    g.records = read_records_csv(records[i]);
    all.insert(all.end(), g.records.begin(), g.records.end());
    groups.push_back(std::move(g));
  }
  std::vector<RunDiagnostics> diag;
  if (diagnostics) {
    std::ifstream in(*diagnostics);
    if (!in) throw std::runtime_error("cannot open " + diagnostics->string());
    diag = diagnostics_from_json(nlohmann::json::parse(in));
  }
  const SummaryTables tables = summarize(groups);
  emit_report(all, tables, out, diag);
  std::cout << format_tables(tables);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output activation functions for binary segmentation"};
  app.require_subcommand(1);

  double epsilon = 0.0025;
  std::string format = "text";
  auto* domains = app.add_subcommand("domains", "Effective domains of the activations");
  domains->add_option("--epsilon", epsilon, "Probability margin")->capture_default_str();
  domains->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  std::string loss = "bce";
  std::string activation = "all";
  std::string range = "-6:6";
  fs::path out;
  auto* losscurve = app.add_subcommand("losscurve", "Single-prediction loss curve as SVG");
  losscurve->add_option("--loss", loss)->required();
  losscurve->add_option("--activation", activation, "Tag or 'all'")->capture_default_str();
  losscurve->add_option("--range", range, "lo:hi")->capture_default_str();
  losscurve->add_option("--out", out)->required();

  fs::path config;
  auto* datagen = app.add_subcommand("datagen", "Generate a synthetic dataset");
  datagen->add_option("--config", config)->required()->check(CLI::ExistingFile);
  datagen->add_option("--out", out)->required();

  std::optional<std::uint64_t> seed;
  std::optional<fs::path> train_config;
  std::optional<fs::path> data;
  auto* train_cmd = app.add_subcommand("train", "Train one classifier on fold 0");
  train_cmd->add_option("--activation", activation)->required();
  train_cmd->add_option("--loss", loss)->required();
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--config", train_config)->check(CLI::ExistingFile);
  train_cmd->add_option("--data", data, "Directory written by datagen")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", out)->required();

  fs::path pred, truth;
  std::optional<fs::path> plots;
  auto* metrics = app.add_subcommand("metrics", "Score predictions against labels");
  metrics->add_option("--pred", pred)->required()->check(CLI::ExistingFile);
  metrics->add_option("--truth", truth)->required()->check(CLI::ExistingFile);
  metrics->add_option("--plots", plots);

  std::optional<std::size_t> workers;
  auto* grid = app.add_subcommand("grid", "Run the activation x loss x fold grid");
  grid->add_option("--config", config)->required()->check(CLI::ExistingFile);
  grid->add_option("--out", out)->required();
  grid->add_option("--workers", workers)->check(CLI::PositiveNumber);

  std::vector<fs::path> records;
  std::vector<std::string> presets;
  std::optional<fs::path> diagnostics;
  auto* report = app.add_subcommand("report", "Tables and plots from saved records");
  report->add_option("--records", records, "records.csv, one per preset")->required()
      ->check(CLI::ExistingFile);
  report->add_option("--preset", presets, "Preset name per records file");
  report->add_option("--diagnostics", diagnostics)->check(CLI::ExistingFile);
  report->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*domains) return cmd_domains(epsilon, format);
    if (*losscurve) return cmd_losscurve(loss, activation, range, out);
    if (*datagen) return cmd_datagen(config, out);
    if (*train_cmd) return cmd_train(activation, loss, seed, train_config, out, data);
    if (*metrics) return cmd_metrics(pred, truth, plots);
    if (*grid) return cmd_grid(config, out, workers);
    if (*report) return cmd_report(records, presets, out, diagnostics);
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
