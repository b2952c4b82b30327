// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stan/cli.hpp"
#include "stan/data.hpp"
#include "stan/evaluation.hpp"
#include "stan/model.hpp"
#include "stan/nn.hpp"
#include "stan/plot.hpp"
#include "stan/spatial.hpp"
#include "stan/temporal.hpp"
#include "stan/training.hpp"

namespace fs = std::filesystem;
using namespace stan;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-5;
constexpr double kGradStep = 1e-6;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kInvariantTolerance = 1e-12;
constexpr int kInvariantTrials = 1000;
constexpr int kPermutationTrials = 100;
constexpr double kPermutationTolerance = 1e-12;
constexpr double kExampleTolerance = 1e-3;
constexpr std::size_t kOverfitSamples = 50;
constexpr std::size_t kOverfitEpochs = 200;
constexpr double kOverfitRatio = 0.05;
constexpr double kOverfitBudgetSeconds = 300.0;
constexpr std::size_t kStudyLength = 5000;
constexpr std::uint64_t kStudySeeds[] = {1, 2, 3};
constexpr double kHaFactor = 0.8;
constexpr double kStudyBudgetSeconds = 1200.0;
constexpr std::size_t kConvergenceEpoch = 40;
constexpr double kRmseTolerance = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(STAN_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void require_cli(const CliResult& r, const std::string& what) {
  if (r.code != cli::kOk) {
    throw std::runtime_error(what + " exited " + std::to_string(r.code) + ": " + r.err);
  }
}

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  Outcome o{true, ""};
  const auto start = Clock::now();
  for (ModelVariant v : {ModelVariant::Stan, ModelVariant::StanSa, ModelVariant::StanTa}) {
    StanConfig cfg = StanConfig::desk_mini();
    cfg.variant = v;
    Model model(cfg);
    const OwnedBatch batch = random_batch(cfg, 4, RngSeed{7});
    GradCheckOptions opts;
    opts.step = kGradStep;
    const GradCheckResult r = check_model_gradients(model, batch.batch, opts);
    o.pass = o.pass && r.max_relative_error < kGradTolerance;
    o.detail += fmt("%s=%.2e(%s) ", std::string(variant_name(v)).c_str(),
                    r.max_relative_error, r.worst_parameter.c_str());
  }
  const double elapsed = seconds_since(start);
  o.pass = o.pass && elapsed < kGradBudgetSeconds;
  o.detail += fmt("tol=%.0e step=%.0e", kGradTolerance, kGradStep);
  return o;
}

Outcome normalization_invariants() {
  Rng rng(RngSeed{2024});
  double worst_sum = 0.0, worst_neg = 0.0, worst_hull = 0.0;
  for (int trial = 0; trial < kInvariantTrials; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    const std::size_t d = 1 + rng.index(16);
    const Tensor q = random_tensor(n, d, rng, -5, 5);
    const Tensor k = random_tensor(n, d, rng, -5, 5);
    const Tensor a = attention_weights(q, k, 1.0 / std::sqrt(static_cast<double>(d)));

    const std::size_t b = 1 + rng.index(4), T = 1 + rng.index(12);
    const std::size_t dd = 1 + rng.index(8), de = 1 + rng.index(8);
    const Tensor s = random_tensor(b, dd, rng, -1, 1);
    std::vector<Tensor> states;
    for (std::size_t t = 0; t < T; ++t) states.push_back(random_tensor(b, de, rng, -1, 1));
    const Parameter score("score", random_tensor(dd, de, rng, -3, 3));
    const GlobalAttention g = global_attention(s, states, score);

    for (const Tensor* w : {&a, &g.weights}) {
      for (std::size_t r = 0; r < w->rows(); ++r) {
        double sum = 0.0;
        for (double x : w->row(r)) {
          sum += x;
          worst_neg = std::min(worst_neg, x);
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      }
    }
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t c = 0; c < de; ++c) {
        double lo = states[0](r, c), hi = lo;
        for (const Tensor& h : states) {
          lo = std::min(lo, h(r, c));
          hi = std::max(hi, h(r, c));
        }
        const double v = g.context(r, c);
        worst_hull = std::max({worst_hull, lo - v, v - hi});
      }
    }
  }
  Outcome o;
  o.pass = worst_sum <= kInvariantTolerance && worst_neg >= 0.0 &&
           worst_hull <= kInvariantTolerance;
  o.detail = fmt("trials=%d max|sum-1|=%.1e min_weight=%.1e hull_excess=%.1e",
                 kInvariantTrials, worst_sum, worst_neg, worst_hull);
  return o;
}

Outcome permutation_equivariance() {
  StanConfig cfg = StanConfig::desk();
  Rng rng(RngSeed{3031});
  double worst = 0.0;
  for (int trial = 0; trial < kPermutationTrials; ++trial) {
    cfg.target = rng.index(cfg.N);
    cfg.seed = 100 + static_cast<std::uint64_t>(trial % 5);
    const Model m(cfg);
    const Tensor w = random_tensor(cfg.N, cfg.T, rng, 0.0, 1.0);
    std::vector<std::size_t> perm(cfg.N);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = cfg.N; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    Tensor pw(cfg.N, cfg.T);
    for (std::size_t i = 0; i < cfg.N; ++i) {
      std::copy_n(w.row(i).begin(), cfg.T, pw.row(perm[i]).begin());
    }
    nlohmann::json j = nlohmann::json::parse(checkpoint_json(m));
    j["config"]["target"] = perm[cfg.target];
    const Model pm = checkpoint_from_json(j.dump());
    const auto a = m.forward_window(w);
    const auto b = pm.forward_window(pw);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  return {worst <= kPermutationTolerance,
          fmt("windows=%d max_abs_diff=%.1e", kPermutationTrials, worst)};
}

Outcome hand_examples() {
  const Tensor qk = Tensor::from_rows({{1}, {0}});
  const Tensor att = scaled_dot_attention(qk, qk, Tensor::from_rows({{2}, {4}}));
  const double e_att = std::max(std::abs(att[0] - 2.5379), std::abs(att[1] - 3.0));

  const Parameter gain("g", Tensor(1, 3, 1.0)), bias("b", Tensor(1, 3, 0.0));
  const Tensor ln = layer_norm_forward(Tensor::from_rows({{1, 2, 3}}), gain, bias);
  const double e_ln = std::max({std::abs(ln[0] + 1.2247), std::abs(ln[1]),
                                std::abs(ln[2] - 1.2247)});

  ParameterSet ps;
  Parameter& theta = ps.add("theta", Tensor(1, 1, 1.0));
  AdamState st(ps, 0.01);
  theta.grad[0] = 2.0;
  adam_step(ps, st);
  const double e_adam = std::abs(theta.value[0] - 0.99);

  return {std::max({e_att, e_ln, e_adam}) < kExampleTolerance,
          fmt("attention=[%.4f,%.4f] layernorm=[%.4f,%.4f,%.4f] adam=%.6f",
              att[0], att[1], ln[0], ln[1], ln[2], theta.value[0])};
}

Outcome overfit_probe() {
  const auto start = Clock::now();
  SynthOptions so;
  so.length = 400;
  so.seed = RngSeed{5};
  StanConfig cfg = StanConfig::desk();
  cfg.epochs = kOverfitEpochs;
  PreparedData d = prepare_data(synth_correlated(so), cfg.T, cfg.n_max, cfg.target, 0.8);
  d.train.samples.resize(kOverfitSamples);
  Model m(cfg);
  const TrainReport r = fit(m, d.train, cfg);
  const double first = r.epochs.front().loss, last = r.epochs.back().loss;
  const double elapsed = seconds_since(start);
  return {!r.failure && r.epochs.size() == kOverfitEpochs && last < kOverfitRatio * first &&
              elapsed < kOverfitBudgetSeconds,
          fmt("epoch1=%.4e epoch%zu=%.4e ratio=%.4f limit=%.2f", first, r.epochs.size(),
              last, last / first, kOverfitRatio)};
}

// The synthetic study trains every variant for every seed through the CLI.
// Criterion 6 reads the reports, criterion 7 the convergence files of the
// first seed.
struct Study {
  std::map<std::string, double> mean_rmse1;
  std::vector<std::map<std::string, double>> per_seed;
  fs::path first_dir;
  double seconds = 0.0;
};

Study run_study() {
  Study s;
  const auto start = Clock::now();
  for (std::uint64_t seed : kStudySeeds) {
    const fs::path dir = scratch("study_seed" + std::to_string(seed));
    if (s.first_dir.empty()) s.first_dir = dir;
    const std::string seed_s = std::to_string(seed);
    require_cli(cli({"synth", "--out", dir.string(), "--seed", seed_s, "--length",
                     std::to_string(kStudyLength)}),
                "synth");
    const std::string data = "data=" + (dir / "synthetic.csv").string();
    for (const char* v : {"STAN", "STANsa", "STANta"}) {
      require_cli(cli({"train", "--out", dir.string(), "--seed", seed_s, "--set", data,
                       "--set", std::string("variant=") + v}),
                  std::string("train ") + v);
    }
    require_cli(cli({"evaluate", "--out", dir.string(), "--set", data}), "evaluate");
    std::map<std::string, double> row;
    for (const EvalResult& r : parse_report_csv(slurp(dir / "report.csv"))) {
      row[r.method] = r.rmse.at(0);
      s.mean_rmse1[r.method] += r.rmse.at(0) / std::size(kStudySeeds);
    }
    s.per_seed.push_back(std::move(row));
  }
  s.seconds = seconds_since(start);
  return s;
}

Outcome table_ordering(const Study& s) {
  const auto& m = s.mean_rmse1;
  const double stan = m.at("STAN"), sa = m.at("STANsa"), ta = m.at("STANta"), ha = m.at("HA");
  Outcome o;
  o.pass = stan < kHaFactor * ha && stan <= sa && stan <= ta && s.seconds < kStudyBudgetSeconds;
  o.detail = fmt("3-seed 1-step RMSE STAN=%.3f STANsa=%.3f STANta=%.3f HA=%.3f "
                 "(need STAN<%.3f, <=STANsa, <=STANta) seeds:",
                 stan, sa, ta, ha, kHaFactor * ha);
  for (const auto& row : s.per_seed) {
    o.detail += fmt(" [%.2f %.2f %.2f]", row.at("STAN"), row.at("STANsa"), row.at("STANta"));
  }
  return o;
}

Outcome convergence_report(const Study& s) {
  Outcome o{true, ""};
  for (const char* v : {"STAN", "STANsa", "STANta"}) {
    const auto rows = read_convergence_csv(s.first_dir / (std::string(v) + "_convergence.csv"));
    const bool ok = rows.size() >= kConvergenceEpoch &&
                    rows[kConvergenceEpoch - 1].loss < rows.front().loss;
    o.pass = o.pass && ok;
    o.detail += ok ? fmt("%s %.4f->%.4f ", v, rows.front().loss,
                         rows[kConvergenceEpoch - 1].loss)
                   : fmt("%s epochs=%zu ", v, rows.size());
  }
  require_cli(cli({"plot", "--out", s.first_dir.string()}), "plot");
  const std::string svg = slurp(s.first_dir / "convergence.svg");
  const bool drawn = svg.rfind("<svg", 0) == 0 && svg.find("STANsa") != std::string::npos;
  o.pass = o.pass && drawn;
  o.detail += drawn ? "convergence.svg ok" : "convergence.svg missing curves";
  return o;
}

Outcome determinism_and_round_trip() {
  Outcome o{true, ""};
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  require_cli(cli({"synth", "--out", a.string(), "--length", "600"}), "synth");
  const std::string data = "data=" + (a / "synthetic.csv").string();
  for (const fs::path& d : {a, b}) {
    require_cli(cli({"train", "--out", d.string(), "--set", data, "--set", "epochs=3"}),
                "train");
  }
  const bool same_ckpt = slurp(a / "STAN.ckpt.json") == slurp(b / "STAN.ckpt.json");
  o.pass = o.pass && same_ckpt;
  o.detail += same_ckpt ? "checkpoints identical; " : "checkpoints differ; ";

  // Save, load, predict in process.
  const FarmSeries series = load_wide_csv(a / "synthetic.csv");
  StanConfig cfg = StanConfig::desk();
  cfg.epochs = 2;
  const PreparedData d = prepare_data(series, cfg.T, cfg.n_max, cfg.target, 0.8);
  Model m(cfg);
  fit(m, d.train, cfg);
  save_checkpoint(m, a / "roundtrip.ckpt.json");
  const Model back = load_checkpoint(a / "roundtrip.ckpt.json");
  std::vector<const Tensor*> windows;
  for (const Sample& s : d.test.samples) windows.push_back(&s.window);
  const Tensor p1 = m.predict(windows), p2 = back.predict(windows);
  const bool same_pred = p1 == p2 && checkpoint_json(m) == checkpoint_json(back);
  o.pass = o.pass && same_pred;
  o.detail += same_pred ? "round trip bit-identical; " : "round trip differs; ";

  // Baseline rows against one-line oracles, in process and through the CLI.
  const auto rows = evaluate_models({}, d.test, d.scaler);
  std::vector<EvalResult> oracle{{kHistoricalAverage, {}, d.test.size()},
                                 {kPersistence, {}, d.test.size()}};
  const auto& sc = d.scaler;
  const std::size_t tgt = cfg.target;
  for (std::size_t k = 0; k < cfg.n_max; ++k) {
    double ha = 0.0, last = 0.0;
    for (const Sample& s : d.test.samples) {
      double sum = 0.0;
      for (double v : s.window.row(tgt)) sum += sc.invert(tgt, v);
      const double y = sc.invert(tgt, s.targets[k]);
      const double mean = sum / static_cast<double>(cfg.T);
      const double prev = sc.invert(tgt, s.window(tgt, cfg.T - 1));
      ha += (mean - y) * (mean - y);
      last += (prev - y) * (prev - y);
    }
    const double n = static_cast<double>(d.test.size());
    oracle[0].rmse.push_back(std::sqrt(ha / n));
    oracle[1].rmse.push_back(std::sqrt(last / n));
  }
  bool exact = rows.size() == 2;
  for (std::size_t i = 0; exact && i < 2; ++i) {
    exact = rows[i].method == oracle[i].method && rows[i].rmse == oracle[i].rmse;
  }
  require_cli(cli({"evaluate", "--out", a.string(), "--set", data}), "evaluate");
  const std::string report = slurp(a / "report.csv");
  const std::string expected = report_csv(oracle);
  const bool cli_rows = report.rfind(expected, 0) == 0;
  o.pass = o.pass && exact && cli_rows;
  o.detail += fmt("HA/persistence oracles %s (cli %s)", exact ? "exact" : "differ",
                  cli_rows ? "matches" : "differs");
  return o;
}

Outcome baseline_oracle() {
  const Tensor w = Tensor::from_rows({{10, 20, 30}});
  const double ha = historical_average(w, 0, 1);
  Rng rng(RngSeed{909});
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + rng.index(64)), t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = rng.uniform(-100, 100);
      t[i] = rng.uniform(-100, 100);
    }
    const double r = rmse(p, t);
    worst = std::max(worst, std::abs(r - std::sqrt(mse_loss(p, t).loss)) / std::max(1.0, r));
  }
  return {ha == 20.0 && worst <= kRmseTolerance,
          fmt("HA[10,20,30]=%.17g max|rmse-sqrt(mse)|=%.1e", ha, worst)};
}

}  // namespace

int main() {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  bool all = true;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("[%s] %d %s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  };

  report(1, "gradient-oracle", gradient_oracle);
  report(2, "normalization-invariants", normalization_invariants);
  report(3, "permutation-equivariance", permutation_equivariance);
  report(4, "hand-computed-kernels", hand_examples);
  report(5, "overfit-probe", overfit_probe);

  Study study;
  bool study_ok = true;
  report(6, "ablation-ordering", [&] {
    try {
      study = run_study();
    } catch (...) {
      study_ok = false;
      throw;
    }
    return table_ordering(study);
  });
  report(7, "convergence-report", [&]() -> Outcome {
    if (!study_ok) return {false, "synthetic study did not complete"};
    return convergence_report(study);
  });
  report(8, "determinism-round-trip", determinism_and_round_trip);
  report(9, "baseline-oracle", baseline_oracle);
  return all ? 0 : 1;
}
