#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "outact/error.hpp"
#include "outact/harness.hpp"
#include "outact/svg.hpp"

namespace outact {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s.empty()) return kNaN;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ContractError("records csv: bad number '" + s + "'");
  }
  return v;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json to_json(const MeanStd& m) { return {{"mean", num(m.mean)}, {"std", num(m.std)}}; }
MeanStd mean_std_from(const json& j) { return {num(j.at("mean")), num(j.at("std"))}; }

json diagram_json(const ReliabilityDiagram& d) {
  json bins = json::array();
  for (const ReliabilityBin& b : d.bins) {
    bins.push_back({{"lo", num(b.lo)},
                    {"hi", num(b.hi)},
                    {"count", b.count},
                    {"confidence", num(b.confidence)},
                    {"fraction", num(b.fraction)}});
  }
  return {{"strategy", std::string(to_string(d.strategy))},
          {"n_bins", d.n_bins},
          {"filter_lo", d.filter_lo},
          {"filter_hi", d.filter_hi},
          {"bins", bins}};
}

ReliabilityDiagram diagram_from(const json& j) {
  ReliabilityDiagram d;
  d.strategy = j.at("strategy").get<std::string>() == "adaptive" ? BinningStrategy::Adaptive
                                                                 : BinningStrategy::EvenlySpaced;
  d.n_bins = j.at("n_bins").get<std::size_t>();
  d.filter_lo = j.at("filter_lo").get<double>();
  d.filter_hi = j.at("filter_hi").get<double>();
  for (const json& b : j.at("bins")) {
    d.bins.push_back({num(b.at("lo")), num(b.at("hi")), b.at("count").get<std::size_t>(),
                      num(b.at("confidence")), num(b.at("fraction"))});
  }
  return d;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    out.push_back(field);
  }
  return out;
}

const RunDiagnostics* find_diag(std::span<const RunDiagnostics> ds, Activation a, Loss l) {
  for (const RunDiagnostics& d : ds) {
    if (d.activation == a && d.loss == l) return &d;
  }
  return nullptr;
}

std::string combo_label(Activation a, Loss l) {
  return std::string(display_name(a)) + " + " + std::string(to_string(l));
}

}  // namespace

std::string records_csv_header() {
  return "activation,loss,fold,nll,dice,threshold,gap_even,gap_adaptive,epochs,converged";
}

std::string records_csv_row(const RunRecord& r) {
  std::ostringstream o;
  o << to_string(r.activation) << ',' << to_string(r.loss) << ',' << r.fold << ','
    << fmt_double(r.nll) << ',' << fmt_double(r.best_dice) << ',' << fmt_double(r.best_threshold)
    << ',' << fmt_double(r.gap_even) << ',' << fmt_double(r.gap_adaptive) << ',' << r.epochs
    << ',' << (r.converged ? "true" : "false");
  return o.str();
}

void write_records_csv(const std::filesystem::path& path, std::span<const RunRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << records_csv_header() << '\n';
  for (const RunRecord& r : records) out << records_csv_row(r) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(records_csv_header())) {
    throw ContractError(path.string() + ": unexpected header");
  }
  std::vector<RunRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 10) {
      throw ContractError(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    }
    RunRecord r;
    r.activation = parse_activation(f[0]);
    r.loss = parse_loss(f[1]);
    r.fold = std::stoul(f[2]);
    r.nll = parse_double(f[3]);
    r.best_dice = parse_double(f[4]);
    r.best_threshold = parse_double(f[5]);
    r.gap_even = parse_double(f[6]);
    r.gap_adaptive = parse_double(f[7]);
    r.epochs = std::stoul(f[8]);
    r.converged = f[9] == "true" || f[9] == "1";
    records.push_back(r);
  }
  return records;
}

json to_json(const SummaryTables& t) {
  json j;
  j["presets"] = t.presets;
  j["combinations"] = json::array();
  for (const CombinationSummary& c : t.combinations) {
    j["combinations"].push_back({{"preset", c.preset},
                                 {"activation", std::string(to_string(c.activation))},
                                 {"loss", std::string(to_string(c.loss))},
                                 {"folds", c.folds},
                                 {"converged_folds", c.converged_folds},
                                 {"nll", to_json(c.nll)},
                                 {"dice", to_json(c.dice)},
                                 {"gap_even", to_json(c.gap_even)},
                                 {"gap_adaptive", to_json(c.gap_adaptive)},
                                 {"best_nll", c.best_nll},
                                 {"best_dice", c.best_dice},
                                 {"worst_nll", c.worst_nll},
                                 {"worst_dice", c.worst_dice}});
  }
  j["sigmoid_wins"] = json::array();
  for (const SigmoidWins& w : t.sigmoid_wins) {
    j["sigmoid_wins"].push_back({{"activation", std::string(to_string(w.activation))},
                                 {"won_nll", w.won_nll},
                                 {"won_dice", w.won_dice},
                                 {"sum", w.sum}});
  }
  j["loss_wins"] = json::array();
  for (const LossWins& w : t.loss_wins) {
    j["loss_wins"].push_back({{"loss", std::string(to_string(w.loss))},
                              {"won_nll", w.won_nll},
                              {"won_dice", w.won_dice},
                              {"sum", w.sum}});
  }
  j["dice_loss_nll"] = json::array();
  for (const DiceLossNllRow& r : t.dice_loss_nll) {
    json acts = json::array();
    json vals = json::array();
    for (std::size_t i = 0; i < r.activations.size(); ++i) {
      acts.push_back(std::string(to_string(r.activations[i])));
      vals.push_back(num(r.nll[i]));
    }
    j["dice_loss_nll"].push_back(
        {{"preset", r.preset}, {"activations", acts}, {"nll", vals}, {"not_decreasing", r.not_decreasing}});
  }
  j["average_dice"] = json::array();
  for (const AverageDice& a : t.average_dice) {
    j["average_dice"].push_back({{"activation", std::string(to_string(a.activation))},
                                 {"loss", std::string(to_string(a.loss))},
                                 {"mean_dice", num(a.mean_dice)},
                                 {"presets", a.presets}});
  }
  j["warnings"] = t.warnings;
  return j;
}

SummaryTables summary_from_json(const json& j) {
  SummaryTables t;
  t.presets = j.at("presets").get<std::vector<std::string>>();
  for (const json& c : j.at("combinations")) {
    CombinationSummary s;
    s.preset = c.at("preset").get<std::string>();
    s.activation = parse_activation(c.at("activation").get<std::string>());
    s.loss = parse_loss(c.at("loss").get<std::string>());
    s.folds = c.at("folds").get<std::size_t>();
    s.converged_folds = c.at("converged_folds").get<std::size_t>();
    s.nll = mean_std_from(c.at("nll"));
    s.dice = mean_std_from(c.at("dice"));
    s.gap_even = mean_std_from(c.at("gap_even"));
    s.gap_adaptive = mean_std_from(c.at("gap_adaptive"));
    s.best_nll = c.at("best_nll").get<bool>();
    s.best_dice = c.at("best_dice").get<bool>();
    s.worst_nll = c.at("worst_nll").get<bool>();
    s.worst_dice = c.at("worst_dice").get<bool>();
    t.combinations.push_back(s);
  }
  for (const json& w : j.at("sigmoid_wins")) {
    t.sigmoid_wins.push_back({parse_activation(w.at("activation").get<std::string>()),
                              w.at("won_nll").get<std::size_t>(), w.at("won_dice").get<std::size_t>(),
                              w.at("sum").get<std::size_t>()});
  }
  for (const json& w : j.at("loss_wins")) {
    t.loss_wins.push_back({parse_loss(w.at("loss").get<std::string>()),
                           w.at("won_nll").get<std::size_t>(), w.at("won_dice").get<std::size_t>(),
                           w.at("sum").get<std::size_t>()});
  }
  for (const json& r : j.at("dice_loss_nll")) {
    DiceLossNllRow row;
    row.preset = r.at("preset").get<std::string>();
    for (const json& a : r.at("activations")) row.activations.push_back(parse_activation(a.get<std::string>()));
    for (const json& v : r.at("nll")) row.nll.push_back(num(v));
    row.not_decreasing = r.at("not_decreasing").get<std::vector<bool>>();
    t.dice_loss_nll.push_back(std::move(row));
  }
  for (const json& a : j.at("average_dice")) {
    t.average_dice.push_back({parse_activation(a.at("activation").get<std::string>()),
                              parse_loss(a.at("loss").get<std::string>()), num(a.at("mean_dice")),
                              a.at("presets").get<std::size_t>()});
  }
  t.warnings = j.at("warnings").get<std::vector<std::string>>();
  return t;
}

std::string format_tables(const SummaryTables& t) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4);
  for (const std::string& preset : t.presets) {
    o << "== " << preset << " ==\n";
    o << std::left << std::setw(22) << "activation" << std::setw(6) << "loss" << std::setw(22)
      << "NLL (lower better)" << std::setw(22) << "dice (higher better)" << std::setw(10)
      << "gap even" << "gap adaptive\n";
    for (const CombinationSummary& c : t.combinations) {
      if (c.preset != preset) continue;
      std::ostringstream nll, dice;
      nll << std::fixed << std::setprecision(4) << c.nll.mean << " +- " << c.nll.std
          << (c.best_nll ? " *" : c.worst_nll ? " -" : "");
      dice << std::fixed << std::setprecision(4) << c.dice.mean << " +- " << c.dice.std
           << (c.best_dice ? " *" : c.worst_dice ? " -" : "");
      o << std::setw(22) << display_name(c.activation) << std::setw(6) << to_string(c.loss)
        << std::setw(22) << nll.str() << std::setw(22) << dice.str() << std::setw(10)
        << c.gap_even.mean << c.gap_adaptive.mean << '\n';
    }
    o << '\n';
  }
  o << "Wins against sigmoid (best loss vs best loss, per preset)\n";
  for (const SigmoidWins& w : t.sigmoid_wins) {
    o << std::setw(22) << display_name(w.activation) << "nll " << w.won_nll << "  dice "
      << w.won_dice << "  sum " << w.sum << '\n';
  }
  o << "\nLoss wins per (activation, preset)\n";
  for (const LossWins& w : t.loss_wins) {
    o << std::setw(22) << to_string(w.loss) << "nll " << w.won_nll << "  dice " << w.won_dice
      << "  sum " << w.sum << '\n';
  }
  o << "\nDice-loss NLL by effective domain ('!' = not decreasing)\n";
  for (const DiceLossNllRow& r : t.dice_loss_nll) {
    o << std::setw(12) << r.preset;
    for (std::size_t i = 0; i < r.activations.size(); ++i) {
      o << ' ' << to_string(r.activations[i]) << '=' << r.nll[i] << (r.not_decreasing[i] ? "!" : "");
    }
    o << '\n';
  }
  o << "\nAverage dice across presets\n";
  for (const AverageDice& a : t.average_dice) {
    o << std::setw(30) << combo_label(a.activation, a.loss) << a.mean_dice << '\n';
  }
  for (const std::string& w : t.warnings) o << "warning: " << w << '\n';
  return o.str();
}

json diagnostics_to_json(std::span<const RunDiagnostics> diagnostics) {
  json arr = json::array();
  for (const RunDiagnostics& d : diagnostics) {
    json j = {{"activation", std::string(to_string(d.activation))},
              {"loss", std::string(to_string(d.loss))},
              {"fold", d.fold},
              {"even", diagram_json(d.even)},
              {"adaptive", d.adaptive ? diagram_json(*d.adaptive) : json(nullptr)}};
    if (d.kde) {
      j["kde"] = {{"step", d.kde->step},
                  {"bandwidth", d.kde->bandwidth},
                  {"grid", d.kde->grid},
                  {"density", d.kde->density}};
    } else {
      j["kde"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<RunDiagnostics> diagnostics_from_json(const json& j) {
  std::vector<RunDiagnostics> out;
  for (const json& e : j) {
    RunDiagnostics d;
    d.activation = parse_activation(e.at("activation").get<std::string>());
    d.loss = parse_loss(e.at("loss").get<std::string>());
    d.fold = e.at("fold").get<std::size_t>();
    d.even = diagram_from(e.at("even"));
    if (!e.at("adaptive").is_null()) d.adaptive = diagram_from(e.at("adaptive"));
    if (!e.at("kde").is_null()) {
      const json& k = e.at("kde");
      d.kde = DensityCurve{k.at("grid").get<std::vector<double>>(),
                           k.at("density").get<std::vector<double>>(), k.at("step").get<double>(),
                           k.at("bandwidth").get<double>()};
    }
    out.push_back(std::move(d));
  }
  return out;
}

void plot_activation_curves(const std::filesystem::path& path, double lo, double hi) {
  constexpr std::size_t kPoints = 401;
  SvgPlot plot("Output activation functions", "x", "f(x)");
  plot.set_x_range(lo, hi);
  plot.set_y_range(0.0, 1.0);
  std::vector<double> xs(kPoints);
  for (std::size_t i = 0; i < kPoints; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / (kPoints - 1);
  }
  std::size_t color = 0;
  for (Activation a : kAllActivations) {
    std::vector<double> ys(kPoints);
    const RescaleContext ctx{lo, hi};
    for (std::size_t i = 0; i < kPoints; ++i) ys[i] = activate({a}, xs[i], ctx);
    SeriesStyle style{a == Activation::Sigmoid ? "#000000" : palette_color(color++),
                      a == Activation::Sigmoid, std::string(display_name(a))};
    plot.add_curve(xs, ys, style);
  }
  plot.save(path);
}

void plot_loss_curves(const std::filesystem::path& path, Loss loss,
                      std::span<const Activation> activations, double lo, double hi) {
  constexpr std::size_t kPoints = 241;
  SvgPlot plot("Single-prediction " + std::string(to_string(loss)) + " loss, y = 1", "x",
               "loss");
  plot.set_x_range(lo, hi);
  std::vector<double> xs(kPoints);
  for (std::size_t i = 0; i < kPoints; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / (kPoints - 1);
  }
  const std::vector<double> y{1.0};
  std::size_t color = 0;
  for (Activation a : activations) {
    std::vector<double> ys(kPoints);
    const RescaleContext ctx{lo, hi};
    for (std::size_t i = 0; i < kPoints; ++i) {
      const double p = clamp_probability(activate({a}, xs[i], ctx));
      ys[i] = loss_value({loss}, std::span<const double>(&p, 1), y);
    }
    SeriesStyle style{a == Activation::Sigmoid ? "#000000" : palette_color(color++),
                      a == Activation::Sigmoid, std::string(display_name(a))};
    plot.add_curve(xs, ys, style);
  }
  plot.save(path);
}

void plot_reliability(const std::filesystem::path& path, const std::string& title,
                      std::span<const ReliabilityDiagram> diagrams,
                      std::span<const std::string> labels) {
  SvgPlot plot(title, "confidence", "fraction of positives");
  plot.set_x_range(0.0, 1.0);
  plot.set_y_range(0.0, 1.0);
  plot.add_reference_line(0.0, 0.0, 1.0, 1.0, {"#888888", true, "perfectly calibrated"});
  for (std::size_t k = 0; k < diagrams.size(); ++k) {
    std::vector<double> conf, frac;
    for (const ReliabilityBin& b : diagrams[k].bins) {
      conf.push_back(b.count ? b.confidence : kNaN);
      frac.push_back(b.count ? b.fraction : kNaN);
    }
    plot.add_curve(conf, frac, {palette_color(k), false, k < labels.size() ? labels[k] : ""});
  }
  plot.save(path);
}

void plot_densities(const std::filesystem::path& path, const std::string& title,
                    std::span<const DensityCurve> curves, std::span<const std::string> labels) {
  SvgPlot plot(title, "predicted probability", "density");
  plot.set_x_range(0.0, 1.0);
  for (std::size_t k = 0; k < curves.size(); ++k) {
    plot.add_curve(curves[k].grid, curves[k].density,
                   {palette_color(k), false, k < labels.size() ? labels[k] : ""});
  }
  plot.save(path);
}

std::vector<std::filesystem::path> emit_report(std::span<const RunRecord> records,
                                               const SummaryTables& tables,
                                               const std::filesystem::path& out_dir,
                                               std::span<const RunDiagnostics> diagnostics) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path marker = out_dir / kReportMarker;
  fs::remove(marker);
  std::vector<fs::path> written;

  write_records_csv(out_dir / "records.csv", records);
  written.push_back(out_dir / "records.csv");

  {
    std::ofstream out(out_dir / "summary.json");
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << to_json(tables).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for summary.json");
    written.push_back(out_dir / "summary.json");
  }
  {
    std::ofstream out(out_dir / "tables.txt");
    out << format_tables(tables);
    if (!out) throw std::runtime_error("write failed for tables.txt");
    written.push_back(out_dir / "tables.txt");
  }

  plot_activation_curves(out_dir / "activations.svg");
  written.push_back(out_dir / "activations.svg");
  for (Loss l : kAllLosses) {
    const fs::path p = out_dir / ("loss_" + std::string(to_string(l)) + ".svg");
    plot_loss_curves(p, l, kAllActivations);
    written.push_back(p);
  }

  if (!diagnostics.empty() && !tables.combinations.empty()) {
    // Best combination by mean dice in the first preset, against sigmoid + BCE.
    const CombinationSummary* best = nullptr;
    for (const CombinationSummary& c : tables.combinations) {
      if (c.preset == tables.presets.front() && (!best || c.dice.mean > best->dice.mean)) best = &c;
    }
    std::vector<std::pair<Activation, Loss>> shown;
    if (best) shown.emplace_back(best->activation, best->loss);
    if (!best || best->activation != Activation::Sigmoid || best->loss != Loss::Bce) {
      shown.emplace_back(Activation::Sigmoid, Loss::Bce);
    }
    for (BinningStrategy s : {BinningStrategy::EvenlySpaced, BinningStrategy::Adaptive}) {
      std::vector<ReliabilityDiagram> ds;
      std::vector<std::string> labels;
      for (const auto& [a, l] : shown) {
        const RunDiagnostics* d = find_diag(diagnostics, a, l);
        if (!d) continue;
        if (s == BinningStrategy::EvenlySpaced) {
          ds.push_back(d->even);
        } else if (d->adaptive) {
          ds.push_back(*d->adaptive);
        } else {
          continue;
        }
        labels.push_back(combo_label(a, l));
      }
      if (ds.empty()) continue;
      const fs::path p = out_dir / ("reliability_" + std::string(to_string(s)) + ".svg");
      plot_reliability(p, "Reliability diagram (" + std::string(to_string(s)) + ")", ds, labels);
      written.push_back(p);
    }

    for (Loss l : kAllLosses) {
      std::vector<DensityCurve> curves;
      std::vector<std::string> labels;
      for (Activation a : {Activation::NormalCdf, Activation::Softsign}) {
        const RunDiagnostics* d = find_diag(diagnostics, a, l);
        if (d && d->kde) {
          curves.push_back(*d->kde);
          labels.push_back(combo_label(a, l));
        }
      }
      if (curves.empty()) continue;
      const fs::path p = out_dir / ("kde_" + std::string(to_string(l)) + ".svg");
      plot_densities(p, "Density of P(prediction | y = 1), " + std::string(to_string(l)), curves,
                     labels);
      written.push_back(p);
    }
  }

  std::ofstream(marker) << "ok\n";
  return written;
}

}  // namespace outact
