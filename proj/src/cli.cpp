#include "stan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stan/config_json.hpp"
#include "stan/data.hpp"
#include "stan/error.hpp"
#include "stan/evaluation.hpp"
#include "stan/kernels.hpp"
#include "stan/plot.hpp"
#include "stan/training.hpp"

namespace stan::cli {
namespace fs = std::filesystem;

namespace {

std::string string_value(std::string_view key, const nlohmann::json& v) {
  if (!v.is_string()) {
    throw UsageError("config key '" + std::string(key) + "' expects a string");
  }
  return v.get<std::string>();
}

}  // namespace

void apply_key(RunConfig& cfg, std::string_view key, const nlohmann::json& value) {
  if (is_config_key(key)) {
    try {
      set_config_value(cfg.model, key, value);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    return;
  }
  if (key == "data") {
    cfg.data = string_value(key, value);
  } else if (key == "meta") {
    cfg.meta = string_value(key, value);
  } else if (key == "checkpoint") {
    cfg.checkpoint = string_value(key, value);
  } else if (key == "out") {
    cfg.out = string_value(key, value);
  } else if (key == "train_fraction") {
    if (!value.is_number()) {
      throw UsageError("config key 'train_fraction' expects a number");
    }
    cfg.train_fraction = value.get<double>();
  } else if (key == "length") {
    if (!value.is_number_unsigned()) {
      throw UsageError("config key 'length' expects a non-negative integer");
    }
    cfg.length = value.get<std::size_t>();
  } else {
    throw UsageError("unknown config key '" + std::string(key) + "'");
  }
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw UsageError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string_view key = assignment.substr(0, eq);
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  apply_key(cfg, key, value);
}

RunConfig load_config(const std::optional<fs::path>& path, Preset preset,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg;
  cfg.model = preset == Preset::Paper ? StanConfig::paper() : StanConfig::desk();
  if (path) {
    std::ifstream f(*path);
    if (!f) throw UsageError("cannot open config file " + path->string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("config " + path->string() + " is not valid JSON (byte " +
                       std::to_string(e.byte) + ")");
    }
    if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : doc.items()) apply_key(cfg, key, value);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  try {
    cfg.model.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw UsageError("train_fraction must lie strictly between 0 and 1");
  }
  return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j = config_to_json(cfg.model);
  j["data"] = cfg.data;
  j["meta"] = cfg.meta;
  j["checkpoint"] = cfg.checkpoint;
  j["out"] = cfg.out;
  j["train_fraction"] = cfg.train_fraction;
  j["length"] = cfg.length;
  return j;
}

namespace {

struct Flags {
  std::optional<std::string> config;
  std::string preset = "desk";
  std::vector<std::string> sets;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve(const Flags& flags) {
  std::optional<fs::path> path;
  if (flags.config) path = *flags.config;
  const Preset preset = flags.preset == "paper" ? Preset::Paper : Preset::Desk;
  std::vector<std::string> sets = flags.sets;
  if (flags.out) sets.push_back("out=\"" + *flags.out + "\"");
  if (flags.seed) sets.push_back("seed=" + std::to_string(*flags.seed));
  return load_config(path, preset, sets);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

FarmSeries load_series(const RunConfig& cfg) {
  if (cfg.data.empty()) throw UsageError("no data CSV configured (set data=<path>)");
  FarmSeries series = load_wide_csv(cfg.data);
  if (!cfg.meta.empty()) load_metadata_csv(cfg.meta, series);
  return series;
}

void require_farms(const FarmSeries& series, const StanConfig& cfg) {
  if (series.farms() != cfg.N) {
    throw UsageError("config has N = " + std::to_string(cfg.N) +
                     " but the data has " + std::to_string(series.farms()) +
                     " farms");
  }
}

fs::path checkpoint_path(const RunConfig& cfg, ModelVariant v) {
  return fs::path(cfg.out) / (std::string(variant_name(v)) + ".ckpt.json");
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  SynthOptions opts;
  if (cfg.model.N > opts.coords.size()) {
    throw UsageError("the synthetic layout has " + std::to_string(opts.coords.size()) +
                     " sites; N = " + std::to_string(cfg.model.N) + " is too many");
  }
  opts.coords.resize(cfg.model.N);
  opts.ids.resize(cfg.model.N);
  opts.length = cfg.length;
  opts.seed = RngSeed{cfg.model.seed};
  const FarmSeries series = synth_correlated(opts);
  fs::create_directories(cfg.out);
  const fs::path data = fs::path(cfg.out) / "synthetic.csv";
  const fs::path meta = fs::path(cfg.out) / "synthetic_meta.csv";
  write_wide_csv(series, data);
  write_metadata_csv(series, meta);
  out << "wrote " << data.string() << " (" << series.farms() << " farms, "
      << series.length() << " rows)\n"
      << "wrote " << meta.string() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, bool dry_run, std::ostream& out,
              std::ostream& err) {
  out << "config " << run_config_to_json(cfg).dump() << '\n';
  if (dry_run) return kOk;
  const FarmSeries series = load_series(cfg);
  require_farms(series, cfg.model);
  const PreparedData data = prepare_data(series, cfg.model.T, cfg.model.n_max,
                                         cfg.model.target, cfg.train_fraction);
  Model model(cfg.model);
  out << "training " << variant_name(cfg.model.variant) << " on "
      << data.train.size() << " windows (" << model.params().element_count()
      << " parameters, " << kernels::backend_name(kernels::active_backend())
      << " kernels)\n";
  const TrainReport report = fit(model, data.train, cfg.model, [&](const EpochRecord& e) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "epoch %zu loss %.6g (%.2fs)\n", e.epoch,
                  e.loss, e.seconds);
    out << buf << std::flush;
  });
  fs::create_directories(cfg.out);
  const fs::path log = fs::path(cfg.out) /
                       (std::string(variant_name(cfg.model.variant)) + "_convergence.csv");
  write_convergence_csv(report, log);
  out << "wrote " << log.string() << '\n';
  if (report.failure) {
    err << "numeric failure: " << *report.failure << '\n';
    return kNumeric;
  }
  const fs::path ckpt = checkpoint_path(cfg, cfg.model.variant);
  save_checkpoint(model, ckpt);
  out << "wrote " << ckpt.string() << '\n';
  return kOk;
}

std::vector<fs::path> find_checkpoints(const RunConfig& cfg,
                                       const std::vector<std::string>& explicit_paths) {
  std::vector<fs::path> paths(explicit_paths.begin(), explicit_paths.end());
  if (paths.empty() && !cfg.checkpoint.empty()) paths.emplace_back(cfg.checkpoint);
  if (paths.empty() && fs::is_directory(cfg.out)) {
    for (const auto& entry : fs::directory_iterator(cfg.out)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 10 && name.ends_with(".ckpt.json")) paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
  }
  return paths;
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& ckpts,
                 std::ostream& out) {
  std::vector<Model> models;
  std::vector<std::string> names;
  for (const fs::path& p : find_checkpoints(cfg, ckpts)) {
    models.push_back(load_checkpoint(p));
    std::string name(variant_name(models.back().config().variant));
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      name = p.filename().string();
    }
    names.push_back(name);
  }
  const StanConfig& shape = models.empty() ? cfg.model : models.front().config();
  const FarmSeries series = load_series(cfg);
  require_farms(series, shape);
  const PreparedData data = prepare_data(series, shape.T, shape.n_max,
                                         shape.target, cfg.train_fraction);
  std::vector<NamedModel> named;
  for (std::size_t i = 0; i < models.size(); ++i) named.push_back({names[i], &models[i]});
  const auto results = evaluate_models(named, data.test, data.scaler);
  fs::create_directories(cfg.out);
  const fs::path report = fs::path(cfg.out) / "report.csv";
  write_text(report, report_csv(results));
  out << report_table(results) << "wrote " << report.string() << '\n';
  return kOk;
}

int cmd_predict(const RunConfig& cfg, const std::vector<std::string>& ckpts,
                std::optional<std::size_t> start, std::ostream& out) {
  const auto paths = find_checkpoints(cfg, ckpts);
  if (paths.size() != 1) {
    throw UsageError("predict needs exactly one checkpoint (found " +
                     std::to_string(paths.size()) + ")");
  }
  const Model model = load_checkpoint(paths.front());
  const StanConfig& mc = model.config();
  const FarmSeries series = load_series(cfg);
  require_farms(series, mc);
  const std::size_t L = series.length();
  if (L < mc.T) throw DataError("series is shorter than one window");
  const std::size_t t0 = start.value_or(L - mc.T);
  if (t0 + mc.T > L) {
    throw DataError("window start " + std::to_string(t0) + " runs past the end of the series");
  }
  const MinMaxScaler scaler =
      MinMaxScaler::fit(series.values, split_point(L, cfg.train_fraction));
  const Tensor window = scaler.apply(slice_cols(series.values, t0, mc.T));
  const std::vector<double> pred = model.forward_window(window);
  out << "horizon,forecast_mw\n";
  char buf[64];
  for (std::size_t k = 0; k < pred.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", k + 1, scaler.invert(mc.target, pred[k]));
    out << buf;
  }
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, const std::vector<std::string>& variants,
                  std::ostream& out) {
  std::vector<ModelVariant> list;
  if (variants.empty()) {
    list = {ModelVariant::Stan, ModelVariant::StanSa, ModelVariant::StanTa};
  } else {
    for (const auto& v : variants) {
      try {
        list.push_back(parse_variant(v));
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    }
  }
  constexpr double kTolerance = 1e-5;
  bool ok = true;
  for (ModelVariant v : list) {
    StanConfig mini = StanConfig::desk_mini();
    mini.variant = v;
    mini.seed = cfg.model.seed;
    Model model(mini);
    const OwnedBatch batch =
        random_batch(mini, 4, derive_seed(RngSeed{cfg.model.seed}, "gradcheck"));
    const GradCheckResult r = check_model_gradients(model, batch.batch);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s max_relative_error=%.3e elements=%zu %s\n",
                  std::string(variant_name(v)).c_str(), r.max_relative_error,
                  r.checked, r.max_relative_error < kTolerance ? "ok" : "FAIL");
    out << buf;
    ok = ok && r.max_relative_error < kTolerance;
  }
  return ok ? kOk : kNumeric;
}

int cmd_plot(const RunConfig& cfg, std::vector<std::string> curves,
             std::optional<std::string> report, std::ostream& out) {
  if (curves.empty() && fs::is_directory(cfg.out)) {
    for (const auto& entry : fs::directory_iterator(cfg.out)) {
      const std::string name = entry.path().filename().string();
      if (name.ends_with("_convergence.csv")) curves.push_back(entry.path().string());
    }
    std::sort(curves.begin(), curves.end());
  }
  if (!report) {
    const fs::path candidate = fs::path(cfg.out) / "report.csv";
    if (fs::exists(candidate)) report = candidate.string();
  }
  if (curves.empty() && !report) {
    throw UsageError("nothing to plot: no convergence CSVs or report found");
  }
  fs::create_directories(cfg.out);
  if (!curves.empty()) {
    std::vector<LossCurve> loaded;
    for (const auto& c : curves) {
      std::string label = fs::path(c).filename().string();
      if (label.ends_with("_convergence.csv")) label.resize(label.size() - 16);
      loaded.push_back({label, read_convergence_csv(c)});
    }
    const fs::path svg = fs::path(cfg.out) / "convergence.svg";
    write_text(svg, render_convergence_svg(loaded));
    out << "wrote " << svg.string() << '\n';
  }
  if (report) {
    std::ifstream f(*report);
    if (!f) throw DataError("cannot open report " + *report);
    std::stringstream buf;
    buf << f.rdbuf();
    const fs::path svg = fs::path(cfg.out) / "rmse.svg";
    write_text(svg, render_rmse_svg(parse_report_csv(buf.str())));
    out << "wrote " << svg.string() << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Spatio-temporal attention forecasting for wind farms", "stan"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "JSON run configuration");
  app.add_option("--preset", flags.preset, "Default hyperparameters")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--set", flags.sets, "Override a config key (key=value)");
  app.add_option("--out", flags.out, "Output directory");
  app.add_option("--seed", flags.seed, "Random seed");

  auto* synth = app.add_subcommand("synth", "Write a synthetic six-farm CSV");
  std::optional<std::size_t> length;
  synth->add_option("--length", length, "Number of timestamps");

  auto* train = app.add_subcommand("train", "Fit a model and write a checkpoint");
  bool dry_run = false;
  train->add_flag("--dry-run", dry_run, "Print the resolved config and stop");

  auto* evaluate = app.add_subcommand("evaluate", "RMSE report for baselines and checkpoints");
  std::vector<std::string> eval_ckpts;
  evaluate->add_option("--checkpoint", eval_ckpts, "Checkpoint to score (repeatable)");

  auto* predict = app.add_subcommand("predict", "Forecast n_max steps from one window");
  std::vector<std::string> predict_ckpt;
  std::optional<std::size_t> start;
  predict->add_option("--checkpoint", predict_ckpt, "Checkpoint to use");
  predict->add_option("--start", start, "First timestamp index of the window");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient oracle");
  std::vector<std::string> variants;
  gradcheck->add_option("--variant", variants, "STAN, STANsa or STANta (repeatable)");

  auto* plot = app.add_subcommand("plot", "Render convergence and RMSE charts to SVG");
  std::vector<std::string> curves;
  std::optional<std::string> report;
  plot->add_option("--convergence", curves, "Convergence CSV (repeatable)");
  plot->add_option("--report", report, "Report CSV from evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    RunConfig cfg = resolve(flags);
    if (length) cfg.length = *length;
    if (*synth) return cmd_synth(cfg, out);
    if (*train) return cmd_train(cfg, dry_run, out, err);
    if (*evaluate) return cmd_evaluate(cfg, eval_ckpts, out);
    if (*predict) return cmd_predict(cfg, predict_ckpt, start, out);
    if (*gradcheck) return cmd_gradcheck(cfg, variants, out);
    if (*plot) return cmd_plot(cfg, curves, report, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace stan::cli
