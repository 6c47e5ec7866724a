#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "outact/activations.hpp"
#include "outact/config.hpp"
#include "outact/datagen.hpp"
#include "outact/losses.hpp"
#include "outact/metrics.hpp"
#include "outact/nnet.hpp"

namespace outact {

struct ExperimentConfig {
  std::vector<ActivationKind> activations;
  std::vector<LossKind> losses;
  std::string preset = "easy";
  TaskConfig task;
  TrainConfig train;
  std::size_t k = 5;
  /// Hidden layer widths of the pixel classifier.
  std::vector<std::size_t> hidden = {16, 16};
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  /// All seven activations (Linear rescaled per batch while training), all
  /// three losses, 200 images of 32 x 32, easy preset.
  static ExperimentConfig defaults();

  /// Keys: activations, losses, preset, shape, image_side, n_images,
  /// noise_sigma, seed, k, lr, batch_size, plateau_patience, stop_patience,
  /// lr_factor, max_epochs, hidden, workers. noise_sigma overrides the
  /// preset's noise level.
  static ExperimentConfig from_key_values(const KeyValues& kv);

  std::vector<std::size_t> layer_sizes() const;
  void validate() const;
};

struct RunRecord {
  Activation activation = Activation::Sigmoid;
  Loss loss = Loss::Bce;
  std::size_t fold = 0;
  double nll = 0.0;
  double best_dice = 0.0;
  double best_threshold = 0.0;
  double gap_even = 0.0;
  /// NaN when adaptive filtering left no predictions.
  double gap_adaptive = 0.0;
  std::size_t epochs = 0;
  bool converged = true;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Per-combination plot data kept from the first validation fold.
struct RunDiagnostics {
  Activation activation = Activation::Sigmoid;
  Loss loss = Loss::Bce;
  std::size_t fold = 0;
  ReliabilityDiagram even;
  std::optional<ReliabilityDiagram> adaptive;
  std::optional<DensityCurve> kde;
};

struct GridResult {
  std::vector<RunRecord> records;        // sorted by (activation, loss, fold)
  std::vector<RunDiagnostics> diagnostics;
};

/// Stable per-run seed from the base seed and the run's identity, so results
/// do not depend on scheduling order.
std::uint64_t derive_run_seed(std::uint64_t base, Activation act, Loss loss, std::size_t fold);

/// Scores a trained classifier on a validation split: pooled NLL, dice
/// threshold sweep and both calibration gaps. Linear is rescaled per image.
RunRecord evaluate_run(const PixelClassifier& net, std::span<const Sample> val_set,
                       ActivationKind act, LossKind loss, RunDiagnostics* diagnostics = nullptr);

/// Trains and scores every (activation, loss, fold) cell. With `log_dir`,
/// each finished record is appended to log_dir/records.partial.csv as it
/// completes.
GridResult run_grid(const ExperimentConfig& cfg,
                    const std::optional<std::filesystem::path>& log_dir = std::nullopt);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

MeanStd mean_std(std::span<const double> values);

struct CombinationSummary {
  std::string preset;
  Activation activation = Activation::Sigmoid;
  Loss loss = Loss::Bce;
  std::size_t folds = 0;
  std::size_t converged_folds = 0;
  MeanStd nll;
  MeanStd dice;
  MeanStd gap_even;
  MeanStd gap_adaptive;
  bool best_nll = false;
  bool best_dice = false;
  bool worst_nll = false;
  bool worst_dice = false;
  friend bool operator==(const CombinationSummary&, const CombinationSummary&) = default;
};

/// Presets on which an activation's best loss beat sigmoid's best loss.
struct SigmoidWins {
  Activation activation = Activation::Sigmoid;
  std::size_t won_nll = 0;
  std::size_t won_dice = 0;
  std::size_t sum = 0;
  friend bool operator==(const SigmoidWins&, const SigmoidWins&) = default;
};

/// (activation, preset) cells in which a loss was the best choice.
struct LossWins {
  Loss loss = Loss::Bce;
  std::size_t won_nll = 0;
  std::size_t won_dice = 0;
  std::size_t sum = 0;
  friend bool operator==(const LossWins&, const LossWins&) = default;
};

/// Dice-loss NLL of the smooth activations in effective-domain order.
/// `not_decreasing[i]` marks entries that fail to drop below their predecessor.
struct DiceLossNllRow {
  std::string preset;
  std::vector<Activation> activations;
  std::vector<double> nll;
  std::vector<bool> not_decreasing;
  friend bool operator==(const DiceLossNllRow&, const DiceLossNllRow&) = default;
};

struct AverageDice {
  Activation activation = Activation::Sigmoid;
  Loss loss = Loss::Bce;
  double mean_dice = 0.0;  // mean over presets of the fold-mean dice
  std::size_t presets = 0;
  friend bool operator==(const AverageDice&, const AverageDice&) = default;
};

struct SummaryTables {
  std::vector<std::string> presets;
  std::vector<CombinationSummary> combinations;
  std::vector<SigmoidWins> sigmoid_wins;
  std::vector<LossWins> loss_wins;
  std::vector<DiceLossNllRow> dice_loss_nll;
  std::vector<AverageDice> average_dice;
  std::vector<std::string> warnings;
  friend bool operator==(const SummaryTables&, const SummaryTables&) = default;
};

struct PresetRecords {
  std::string preset;
  std::vector<RunRecord> records;
};

/// Fold statistics and cross-combination comparisons. A combination missing
/// any fold seen elsewhere in its preset is dropped with a warning.
SummaryTables summarize(std::span<const PresetRecords> groups);
SummaryTables summarize(std::span<const RunRecord> records, const std::string& preset = "default");

nlohmann::json to_json(const SummaryTables& tables);
SummaryTables summary_from_json(const nlohmann::json& j);

/// Plain-text rendering of the summary tables.
std::string format_tables(const SummaryTables& tables);

void write_records_csv(const std::filesystem::path& path, std::span<const RunRecord> records);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);
std::string records_csv_header();
std::string records_csv_row(const RunRecord& r);

nlohmann::json diagnostics_to_json(std::span<const RunDiagnostics> diagnostics);
std::vector<RunDiagnostics> diagnostics_from_json(const nlohmann::json& j);

/// SVG of the activation curves over [lo, hi], sigmoid dashed.
void plot_activation_curves(const std::filesystem::path& path, double lo = -10.0,
                            double hi = 10.0);
/// Loss of a single prediction with y = 1 and p = f(x) over [lo, hi].
void plot_loss_curves(const std::filesystem::path& path, Loss loss,
                      std::span<const Activation> activations, double lo = -6.0,
                      double hi = 6.0);
void plot_reliability(const std::filesystem::path& path, const std::string& title,
                      std::span<const ReliabilityDiagram> diagrams,
                      std::span<const std::string> labels);
void plot_densities(const std::filesystem::path& path, const std::string& title,
                    std::span<const DensityCurve> curves, std::span<const std::string> labels);

inline constexpr const char* kReportMarker = "report.complete";

/// Writes records.csv, summary.json, tables.txt and the SVG plots into
/// `out_dir`, then the completion marker. Reliability and density plots need
/// `diagnostics`.
std::vector<std::filesystem::path> emit_report(std::span<const RunRecord> records,
                                               const SummaryTables& tables,
                                               const std::filesystem::path& out_dir,
                                               std::span<const RunDiagnostics> diagnostics = {});

}  // namespace outact
