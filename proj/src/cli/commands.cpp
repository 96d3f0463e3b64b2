#include "ordcal/calibration.hpp"
#include "ordcal/cli.hpp"
#include "ordcal/metrics.hpp"
#include "ordcal/rng.hpp"
#include "ordcal/serialization.hpp"
#include "ordcal/validation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ordcal::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json jvec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(jnum(v(i)));
  return a;
}

Eigen::VectorXd vec_from(const Json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = a[i].is_null() ? std::nan("") : a[i].get<double>();
  return v;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "NA";
  return format_number(v);
}

// State shared by every subcommand.
struct Context {
  std::vector<std::string> argv;
  std::optional<std::uint64_t> seed_flag;
  std::string out_dir = ".";
  std::string format = "json";
  unsigned threads = 0;

  RunManifest manifest;

  std::uint64_t seed() {
    std::uint64_t s = 1;
    if (seed_flag) {
      s = *seed_flag;
    } else if (const char* env = std::getenv("ORDCAL_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        s = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw DataError(std::string("ORDCAL_SEED is not an unsigned integer: '") + env + "'");
      }
    }
    manifest.seed = s;
    manifest.generator = std::string(CounterRng::id);
    return s;
  }

  void input(const std::string& path) { manifest.input_digests[path] = sha256_file(path); }

  std::string out(const std::string& name) {
    const std::string p = (fs::path(out_dir) / name).string();
    manifest.outputs.push_back(name);
    return p;
  }

  // Manifest file is <stem>.manifest.json; stem defaults to the command name.
  void finish(const std::string& command, std::string stem = {}) {
    manifest.command = command;
    manifest.arguments = argv;
    manifest.version = tool_version();
    manifest.timestamp = utc_now();
    std::string name = stem.empty() ? command : stem;
    for (char& c : name)
      if (c == ' ') c = '-';
    write_atomic((fs::path(out_dir) / (name + ".manifest.json")).string(), manifest_json(manifest));
  }
};

std::vector<ModelSpec> parse_families(const std::string& list) {
  if (list == "all") return all_families();
  if (list == "main") return main_families();
  std::vector<ModelSpec> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_family(item));
  if (out.empty()) throw DataError("no model families given");
  return out;
}

std::vector<Scenario> parse_scenarios(const std::string& truth, const std::string& list) {
  TruthForm form;
  if (truth == "mlr")
    form = TruthForm::mlr;
  else if (truth == "clpo" || truth == "cl-po")
    form = TruthForm::clpo;
  else
    throw DataError("--truth must be mlr or clpo");
  std::vector<Scenario> out;
  if (list == "all") {
    for (const auto& s : builtin_scenarios())
      if (s.form == form) out.push_back(s);
    return out;
  }
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    int n = 0;
    try {
      n = std::stoi(item);
    } catch (const std::exception&) {
      throw DataError("scenario numbers must be integers, got '" + item + "'");
    }
    out.push_back(find_scenario(form, n));
  }
  if (out.empty()) throw DataError("no scenarios given");
  return out;
}

Json weak_json(const WeakCalibration& w) {
  Json j;
  j["target"] = w.target.label();
  j["intercept"] = jnum(w.intercept);
  j["slope"] = jnum(w.slope);
  j["converged"] = w.converged;
  if (!w.message.empty()) j["message"] = w.message;
  return j;
}

Json evaluation_json(const Evaluation& e) {
  Json j;
  j["category_intercept"] = jvec(e.category_intercept);
  j["category_slope"] = jvec(e.category_slope);
  j["dichotomy_intercept"] = jvec(e.dichotomy_intercept);
  j["dichotomy_slope"] = jvec(e.dichotomy_slope);
  j["lp_intercept"] = jvec(e.lp_intercept);
  j["lp_slope"] = jvec(e.lp_slope);
  j["eci"] = jnum(e.eci);
  j["rmspe"] = jnum(e.rmspe);
  j["orc"] = jnum(e.orc);
  j["warnings"] = e.warnings;
  return j;
}

Evaluation evaluation_from(const Json& j) {
  Evaluation e;
  e.category_intercept = vec_from(j.at("category_intercept"));
  e.category_slope = vec_from(j.at("category_slope"));
  e.dichotomy_intercept = vec_from(j.at("dichotomy_intercept"));
  e.dichotomy_slope = vec_from(j.at("dichotomy_slope"));
  e.lp_intercept = vec_from(j.at("lp_intercept"));
  e.lp_slope = vec_from(j.at("lp_slope"));
  auto get = [&](const char* k) { return j.at(k).is_null() ? std::nan("") : j.at(k).get<double>(); };
  e.eci = get("eci");
  e.rmspe = get("rmspe");
  e.orc = get("orc");
  return e;
}

Json row_json(const PerformanceRow& r, bool detail) {
  Json j;
  j["scenario"] = r.scenario_id;
  j["model"] = family_name(r.spec);
  j["K"] = r.K;
  j["n_dev"] = r.n_dev;
  j["n_eval"] = r.n_eval;
  j["replicates"] = r.replicates;
  j["failures"] = r.failures;
  j["redraws"] = r.redraws;
  j["excluded_slopes"] = r.excluded_slopes;
  j["summary"] = evaluation_json(r.mean);
  j["failure_log"] = r.failure_log;
  if (detail) {
    Json reps = Json::array();
    for (const auto& e : r.per_replicate) reps.push_back(evaluation_json(e));
    j["per_replicate"] = reps;
  }
  return j;
}

PerformanceRow row_from(const Json& j) {
  PerformanceRow r;
  r.scenario_id = j.at("scenario").get<std::string>();
  r.spec = parse_family(j.at("model").get<std::string>());
  r.K = j.at("K").get<int>();
  r.n_dev = j.at("n_dev").get<Eigen::Index>();
  r.n_eval = j.at("n_eval").get<Eigen::Index>();
  r.replicates = j.at("replicates").get<int>();
  r.failures = j.at("failures").get<int>();
  r.redraws = j.at("redraws").get<int>();
  r.excluded_slopes = j.at("excluded_slopes").get<int>();
  r.mean = evaluation_from(j.at("summary"));
  return r;
}

// Summary CSV; rows with fewer categories than the widest are padded with NA.
std::string performance_csv(const std::vector<PerformanceRow>& rows) {
  int K = 2;
  for (const auto& r : rows) K = std::max(K, r.K);
  CsvTable t;
  t.header = performance_columns(K);
  for (const auto& r : rows) {
    PerformanceRow padded = r;
    auto pad = [](Eigen::VectorXd& v, Eigen::Index n) {
      const Eigen::Index old = v.size();
      v.conservativeResize(n);
      for (Eigen::Index i = old; i < n; ++i) v(i) = std::nan("");
    };
    pad(padded.mean.category_intercept, K);
    pad(padded.mean.category_slope, K);
    pad(padded.mean.dichotomy_intercept, K - 1);
    pad(padded.mean.dichotomy_slope, K - 1);
    pad(padded.mean.lp_intercept, K - 1);
    pad(padded.mean.lp_slope, K - 1);
    t.rows.push_back(performance_values(padded));
  }
  return to_csv(t);
}

Json study_json(const std::string& design, const std::vector<PerformanceRow>& rows, std::uint64_t seed,
                const Json& settings) {
  Json j;
  j["format"] = "ordcal-study";
  j["design"] = design;
  j["seed"] = seed;
  j["generator"] = std::string(CounterRng::id);
  j["settings"] = settings;
  Json arr = Json::array();
  for (const auto& r : rows) arr.push_back(row_json(r, true));
  j["rows"] = arr;
  return j;
}

void write_json(Context& ctx, const std::string& name, const Json& j) {
  write_atomic(ctx.out(name), j.dump(2) + "\n");
}

// --- subcommands ---------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  Eigen::Index n = 1000;
  std::string name = "data";
};

void cmd_simulate(Context& ctx, const SimulateArgs& a) {
  const Scenario& sc = find_scenario(a.scenario);
  if (a.n < 1) throw DataError("--n must be positive");
  const std::uint64_t seed = ctx.seed();
  const SimulatedData sim = generate(sc, a.n, seed);
  write_atomic(ctx.out(a.name + ".csv"), dataset_csv(sim.data, &sim.truth));
  Json side;
  side["scenario"] = sim.scenario_id;
  side["seed"] = sim.seed;
  side["generator"] = sim.generator;
  side["n"] = a.n;
  side["K"] = sc.K;
  side["Q"] = sc.Q;
  side["outcome_column"] = "y";
  side["truth_prefix"] = "truth_";
  write_json(ctx, a.name + ".json", side);
  ctx.finish("simulate", a.name);
}

struct DataArgs {
  std::string path;
  std::string outcome = "y";
  std::string truth_prefix = "truth_";
};

LoadedData load(Context& ctx, const DataArgs& d) {
  ctx.input(d.path);
  return load_dataset(d.path, d.outcome, d.truth_prefix);
}

struct FitArgs {
  DataArgs data;
  std::string family = "mlr";
  std::string name = "model";
  double tolerance = 1e-8;
  int max_iterations = 100;
};

void cmd_fit(Context& ctx, const FitArgs& a) {
  const LoadedData ld = load(ctx, a.data);
  FitOptions opt;
  opt.tolerance = a.tolerance;
  opt.max_iterations = a.max_iterations;
  const FittedModel m = fit(ld.data, parse_family(a.family), opt);
  save_model(m, ctx.out(a.name + ".json"));
  for (const auto& w : m.diagnostics.warnings) std::cerr << "warning: " << w << "\n";
  if (!m.converged) std::cerr << "warning: fit did not converge: " << m.diagnostics.message << "\n";
  ctx.finish("fit", a.name);
  if (!m.converged) throw NumericalError("fit did not converge (model written with converged=false)");
}

struct ModelDataArgs {
  std::string model;
  DataArgs data;
};

FittedModel load_model_input(Context& ctx, const std::string& path) {
  ctx.input(path);
  return load_model(path);
}

void check_compatible(const FittedModel& m, const LoadedData& ld) {
  if (ld.data.Q() != m.Q)
    throw DataError("data has " + std::to_string(ld.data.Q()) + " predictors, model expects " + std::to_string(m.Q));
  if (ld.data.K > m.K) throw DataError("data has labels above the model's K=" + std::to_string(m.K));
}

void cmd_predict(Context& ctx, const ModelDataArgs& a, const std::string& name) {
  const FittedModel m = load_model_input(ctx, a.model);
  const LoadedData ld = load(ctx, a.data);
  check_compatible(m, ld);
  const ProbMatrix p = predict_probs(m, ld.data.predictors);
  write_atomic(ctx.out(name + ".csv"), probs_csv(p));
  if (!p.all_valid())
    std::cerr << "warning: " << (!p.valid).count() << " rows have negative estimated risks\n";
  ctx.finish("predict", name);
}

struct CalibrateArgs {
  ModelDataArgs io;
  std::string setup = "mlr-reference";
  int df = 4;
  std::string plots = "both";
};

void write_plots(Context& ctx, const ProbMatrix& probs, const FlexibleRecalibration& rec, const std::string& which) {
  if (which == "none") return;
  Json manifest;
  manifest["setup"] = setup_name(rec.setup);
  manifest["columns"] = {"estimated", "observed"};
  Json sets = Json::array();
  for (CurveMode mode : {CurveMode::category, CurveMode::dichotomy}) {
    const std::string mode_name = mode == CurveMode::category ? "category" : "dichotomy";
    if (which != "both" && which != mode_name) continue;
    const CalibrationCurves curves = calibration_curve_data(probs, rec, mode);
    Json entry;
    entry["mode"] = mode_name;
    Json targets = Json::array();
    int idx = mode == CurveMode::category ? 1 : 2;
    for (const auto& t : curves.targets) {
      const std::string stem = "plots/" + mode_name + "_" + std::to_string(idx++);
      auto tsv = [](const Eigen::MatrixXd& M) {
        std::string s = "estimated\tobserved\n";
        for (Eigen::Index i = 0; i < M.rows(); ++i) s += csv_num(M(i, 0)) + "\t" + csv_num(M(i, 1)) + "\n";
        return s;
      };
      write_atomic(ctx.out(stem + "_scatter.tsv"), tsv(t.scatter));
      write_atomic(ctx.out(stem + "_curve.tsv"), tsv(t.curve));
      targets.push_back({{"label", t.label}, {"scatter", stem + "_scatter.tsv"}, {"curve", stem + "_curve.tsv"}});
    }
    entry["targets"] = targets;
    sets.push_back(entry);
  }
  manifest["plots"] = sets;
  write_json(ctx, "plots/manifest.json", manifest);
}

void cmd_calibrate(Context& ctx, const CalibrateArgs& a) {
  const FittedModel m = load_model_input(ctx, a.io.model);
  const LoadedData ld = load(ctx, a.io.data);
  check_compatible(m, ld);
  Dataset data = ld.data;
  data.K = m.K;
  const ProbMatrix probs = predict_probs(m, data.predictors);
  const Eigen::VectorXi& y = data.outcomes;
  const RecalSetup setup = parse_setup(a.setup);

  Json j;
  j["model"] = family_name(m.spec);
  j["n"] = data.n();
  j["K"] = m.K;
  j["invalid_rows"] = (!probs.valid).count();
  Json weak = Json::array();
  for (int k = 1; k <= m.K; ++k) {
    try {
      weak.push_back(weak_json(weak_calibration(probs, y, {TargetKind::category, k})));
    } catch (const DataError& e) {
      weak.push_back({{"target", CalibrationTarget{TargetKind::category, k}.label()}, {"error", e.what()}});
    }
  }
  for (int k = 2; k <= m.K; ++k) {
    try {
      weak.push_back(weak_json(weak_calibration(probs, y, {TargetKind::dichotomy, k})));
    } catch (const DataError& e) {
      weak.push_back({{"target", CalibrationTarget{TargetKind::dichotomy, k}.label()}, {"error", e.what()}});
    }
  }
  j["weak"] = weak;
  Json ms = Json::array();
  for (const auto& w : model_specific_calibration(m, data)) ms.push_back(weak_json(w));
  j["model_specific"] = ms;

  Json flex;
  flex["setup"] = setup_name(setup);
  flex["df"] = a.df;
  std::optional<FlexibleRecalibration> rec;
  try {
    rec = flexible_recalibration(probs, y, setup, a.df);
    flex["eci_original"] = jnum(eci(probs, *rec, y, EciVariant::original));
    try {
      flex["eci_rescaled"] = jnum(eci(probs, *rec, y, EciVariant::rescaled));
    } catch (const Error& e) {
      flex["eci_rescaled"] = nullptr;
      flex["error"] = e.what();
    }
    flex["warnings"] = rec->warnings;
  } catch (const Error& e) {
    flex["error"] = e.what();
  }
  j["flexible"] = flex;
  const OrcResult o = orc_detail(expected_outcome_score(probs), y, m.K);
  j["orc"] = o.value;
  if (!o.warnings.empty()) j["orc_warnings"] = o.warnings;
  if (ld.truth) {
    if (ld.truth->K() != m.K) throw DataError("truth columns do not match the model's K");
    j["rmspe"] = rmspe(probs, *ld.truth);
  }

  if (ctx.format == "csv") {
    CsvTable t;
    t.header = {"layer", "target", "intercept", "slope", "value"};
    for (const char* layer : {"weak", "model_specific"})
      for (const auto& w : j[layer])
        t.rows.push_back({layer, w["target"].get<std::string>(),
                          w.contains("intercept") && !w["intercept"].is_null() ? csv_num(w["intercept"].get<double>()) : "NA",
                          w.contains("slope") && !w["slope"].is_null() ? csv_num(w["slope"].get<double>()) : "NA", ""});
    auto metric = [&](const std::string& name, const Json& v) {
      t.rows.push_back({"metric", name, "", "", v.is_number() ? csv_num(v.get<double>()) : "NA"});
    };
    metric("eci_original", flex.value("eci_original", Json(nullptr)));
    metric("eci_rescaled", flex.value("eci_rescaled", Json(nullptr)));
    metric("orc", j["orc"]);
    if (ld.truth) metric("rmspe", j["rmspe"]);
    write_atomic(ctx.out("calibration.csv"), to_csv(t));
  } else {
    write_json(ctx, "calibration.json", j);
  }
  if (rec) write_plots(ctx, probs, *rec, a.plots);
  ctx.finish("calibrate");
}

struct BootstrapArgs {
  DataArgs data;
  std::string families = "mlr";
  int B = 200;
};

void cmd_bootstrap(Context& ctx, const BootstrapArgs& a) {
  const LoadedData ld = load(ctx, a.data);
  BootstrapOptions opt;
  opt.B = a.B;
  opt.seed = ctx.seed();
  opt.threads = ctx.threads;
  Json arr = Json::array();
  CsvTable t;
  t.header = {"model", "metric", "apparent", "optimism", "corrected", "resamples"};
  int failed = 0;
  for (const auto& spec : parse_families(a.families)) {
    Json j;
    j["model"] = family_name(spec);
    try {
      const BootstrapResult r = bootstrap_correct(ld.data, spec, opt);
      j["B"] = r.B;
      j["redraws"] = r.redraws;
      j["failures"] = r.failures;
      j["exhausted"] = r.exhausted;
      Json ms = Json::array();
      for (const auto& m : r.metrics) {
        ms.push_back({{"metric", m.name}, {"apparent", jnum(m.apparent)}, {"optimism", jnum(m.optimism)},
                      {"corrected", jnum(m.corrected)}, {"resamples", m.resamples}});
        t.rows.push_back({family_name(spec), m.name, csv_num(m.apparent), csv_num(m.optimism), csv_num(m.corrected),
                          std::to_string(m.resamples)});
      }
      j["metrics"] = ms;
      j["warnings"] = r.warnings;
    } catch (const Error& e) {
      ++failed;
      j["error"] = e.what();
      std::cerr << family_name(spec) << ": " << e.what() << "\n";
    }
    arr.push_back(j);
  }
  Json out;
  out["n"] = ld.data.n();
  out["K"] = ld.data.K;
  out["seed"] = opt.seed;
  out["results"] = arr;
  if (ctx.format == "csv")
    write_atomic(ctx.out("bootstrap.csv"), to_csv(t));
  else
    write_json(ctx, "bootstrap.json", out);
  ctx.finish("bootstrap");
  if (failed == static_cast<int>(arr.size())) throw NumericalError("every bootstrap run failed");
}

void cmd_lrtest(Context& ctx, const DataArgs& d, const std::string& predictor) {
  const LoadedData ld = load(ctx, d);
  std::vector<int> qs;
  if (predictor == "all") {
    for (int q = 0; q < ld.data.Q(); ++q) qs.push_back(q);
  } else {
    const auto& names = ld.data.column_names;
    const auto it = std::find(names.begin(), names.end(), predictor);
    if (it != names.end()) {
      qs.push_back(static_cast<int>(it - names.begin()));
    } else {
      try {
        qs.push_back(std::stoi(predictor) - 1);
      } catch (const std::exception&) {
        throw DataError("no predictor named '" + predictor + "'");
      }
    }
  }
  Json arr = Json::array();
  CsvTable t;
  t.header = {"predictor", "statistic", "df", "p_value", "loglik_po", "loglik_relaxed"};
  for (int q : qs) {
    const LrTestResult r = lr_test_proportionality(ld.data, q);
    arr.push_back({{"predictor", r.name}, {"statistic", r.statistic}, {"df", r.df}, {"p_value", r.p_value},
                   {"loglik_po", r.loglik_proportional}, {"loglik_relaxed", r.loglik_relaxed}});
    t.rows.push_back({r.name, csv_num(r.statistic), std::to_string(r.df), csv_num(r.p_value),
                      csv_num(r.loglik_proportional), csv_num(r.loglik_relaxed)});
  }
  if (ctx.format == "csv")
    write_atomic(ctx.out("lrtest.csv"), to_csv(t));
  else
    write_json(ctx, "lrtest.json", Json{{"tests", arr}});
  ctx.finish("lrtest-po");
}

struct StudyArgs {
  std::string truth = "mlr";
  std::string scenarios = "1";
  std::string families = "main";
  Eigen::Index n = 200000;
  Eigen::Index n_dev = 100;
  int reps = 200;
  Eigen::Index n_eval = 200000;
  std::string setup = "mlr-reference";
};

void cmd_large(Context& ctx, const StudyArgs& a) {
  LargeSampleOptions opt;
  opt.n = a.n;
  opt.seed = ctx.seed();
  opt.evaluation.setup = parse_setup(a.setup);
  const auto rows = large_sample_study(parse_scenarios(a.truth, a.scenarios), parse_families(a.families), opt);
  Json settings{{"n", a.n}, {"families", a.families}, {"setup", a.setup}};
  write_json(ctx, "study.json", study_json("large-sample", rows, opt.seed, settings));
  write_atomic(ctx.out("study.csv"), performance_csv(rows));
  ctx.finish("study large-sample");
}

void cmd_small(Context& ctx, const StudyArgs& a) {
  SmallSampleOptions opt;
  opt.n_dev = a.n_dev;
  opt.reps = a.reps;
  opt.n_eval = a.n_eval;
  opt.seed = ctx.seed();
  opt.threads = ctx.threads;
  std::vector<PerformanceRow> rows;
  for (const auto& sc : parse_scenarios(a.truth, a.scenarios)) {
    auto r = small_sample_study(sc, parse_families(a.families), opt);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  Json settings{{"n_dev", a.n_dev}, {"reps", a.reps}, {"n_eval", a.n_eval}, {"families", a.families}};
  write_json(ctx, "study.json", study_json("small-sample", rows, opt.seed, settings));
  write_atomic(ctx.out("study.csv"), performance_csv(rows));
  ctx.finish("study small-sample");
}

void cmd_scenarios(Context& ctx, bool to_file) {
  Json arr = Json::array();
  CsvTable t;
  t.header = {"id", "truth", "Q", "K", "predictors", "priors", "nominal_orc", "description"};
  for (const auto& s : builtin_scenarios()) {
    std::string priors;
    for (Eigen::Index k = 0; k < s.priors.size(); ++k) priors += (k ? " " : "") + format_number(s.priors(k));
    const bool binary = !s.kinds.empty() && s.kinds.front() == PredictorKind::binary;
    Json j{{"id", s.id}, {"truth", s.form == TruthForm::mlr ? "mlr" : "clpo"}, {"Q", s.Q}, {"K", s.K},
           {"predictors", binary ? "binary" : "continuous"}, {"priors", jvec(s.priors)},
           {"nominal_orc", s.nominal_orc}, {"description", s.description}};
    if (s.form == TruthForm::clpo) {
      j["alpha"] = jvec(s.alpha);
      j["beta"] = jvec(s.beta);
    }
    Json means = Json::array();
    for (Eigen::Index q = 0; q < s.means.rows(); ++q) means.push_back(jvec(s.means.row(q).transpose()));
    j["means"] = means;
    arr.push_back(j);
    t.rows.push_back({s.id, j["truth"].get<std::string>(), std::to_string(s.Q), std::to_string(s.K),
                      j["predictors"].get<std::string>(), priors, format_number(s.nominal_orc), s.description});
  }
  const std::string text = ctx.format == "csv" ? to_csv(t) : Json{{"scenarios", arr}}.dump(2) + "\n";
  if (to_file) {
    write_atomic(ctx.out(ctx.format == "csv" ? "scenarios.csv" : "scenarios.json"), text);
    ctx.finish("scenarios list");
  } else {
    std::cout << text;
  }
}

void cmd_report(Context& ctx, const std::string& input, bool to_file) {
  ctx.input(input);
  std::ifstream in(input);
  if (!in) throw DataError("cannot open " + input);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError(input + ": " + e.what());
  }
  if (j.value("format", "") != "ordcal-study") throw DataError(input + " is not a study result");
  std::vector<PerformanceRow> rows;
  for (const auto& r : j.at("rows")) rows.push_back(row_from(r));
  std::string text;
  if (ctx.format == "csv") {
    text = performance_csv(rows);
  } else {
    Json out;
    out["design"] = j.value("design", "");
    Json arr = Json::array();
    for (const auto& r : rows) arr.push_back(row_json(r, false));
    out["rows"] = arr;
    text = out.dump(2) + "\n";
  }
  if (to_file) {
    write_atomic(ctx.out(ctx.format == "csv" ? "report.csv" : "report.json"), text);
    ctx.finish("report");
  } else {
    std::cout << text;
  }
}

void add_data_options(CLI::App* c, DataArgs& d) {
  c->add_option("--data", d.path, "CSV dataset")->required()->check(CLI::ExistingFile);
  c->add_option("--outcome", d.outcome, "outcome column")->capture_default_str();
  c->add_option("--truth-prefix", d.truth_prefix, "prefix of true-risk columns")->capture_default_str();
}

}  // namespace

int run(int argc, char** argv) {
  Context ctx;
  for (int i = 1; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

  CLI::App app{"Ordinal risk models: fitting, calibration assessment and simulation studies", "ordcal"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  // global options may also follow the subcommand
  app.fallthrough();
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "random seed (default: ORDCAL_SEED, then 1)");
  app.add_option("--out-dir", ctx.out_dir, "output directory")->capture_default_str();
  app.add_option("--format", ctx.format, "report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app.add_option("--threads", ctx.threads, "worker threads for replicates (0 = all cores)")->capture_default_str();

  std::function<void()> action;

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate a dataset from a built-in scenario");
  c_sim->add_option("--scenario", sim.scenario, "scenario id, e.g. MLR-1 or CLPO-2")->required();
  c_sim->add_option("--n", sim.n, "rows")->capture_default_str();
  c_sim->add_option("--name", sim.name, "output file stem")->capture_default_str();
  c_sim->callback([&] { action = [&] { cmd_simulate(ctx, sim); }; });

  FitArgs fa;
  auto* c_fit = app.add_subcommand("fit", "fit a model by maximum likelihood");
  add_data_options(c_fit, fa.data);
  c_fit->add_option("--family", fa.family, "mlr|cl-po|cl-np|ac-po|ac-np|cr-po|cr-np|slm")->capture_default_str();
  c_fit->add_option("--name", fa.name, "output file stem")->capture_default_str();
  c_fit->add_option("--tolerance", fa.tolerance, "relative log-likelihood tolerance")->capture_default_str();
  c_fit->add_option("--max-iterations", fa.max_iterations)->capture_default_str();
  c_fit->callback([&] { action = [&] { cmd_fit(ctx, fa); }; });

  ModelDataArgs pa;
  std::string pred_name = "probs";
  auto* c_pred = app.add_subcommand("predict", "estimated risks for a dataset");
  c_pred->add_option("--model", pa.model, "model JSON")->required()->check(CLI::ExistingFile);
  add_data_options(c_pred, pa.data);
  c_pred->add_option("--name", pred_name, "output file stem")->capture_default_str();
  c_pred->callback([&] { action = [&] { cmd_predict(ctx, pa, pred_name); }; });

  CalibrateArgs ca;
  auto* c_cal = app.add_subcommand("calibrate", "calibration report of a model on a dataset");
  c_cal->add_option("--model", ca.io.model, "model JSON")->required()->check(CLI::ExistingFile);
  add_data_options(c_cal, ca.io.data);
  c_cal->add_option("--setup", ca.setup, "flexible recalibration setup")
      ->check(CLI::IsMember({"mlr-reference", "cr-reference", "mlr-dichotomy", "cr-dichotomy", "mlr-category",
                             "cr-category"}))
      ->capture_default_str();
  c_cal->add_option("--df", ca.df, "spline degrees of freedom")->capture_default_str();
  c_cal->add_option("--plots", ca.plots, "plot data to write")
      ->check(CLI::IsMember({"none", "category", "dichotomy", "both"}))
      ->capture_default_str();
  c_cal->callback([&] { action = [&] { cmd_calibrate(ctx, ca); }; });

  BootstrapArgs ba;
  auto* c_boot = app.add_subcommand("bootstrap", "optimism-corrected performance by bootstrap");
  add_data_options(c_boot, ba.data);
  c_boot->add_option("--family", ba.families, "family, comma list, 'main' or 'all'")->capture_default_str();
  c_boot->add_option("--B", ba.B, "bootstrap resamples")->capture_default_str();
  c_boot->callback([&] { action = [&] { cmd_bootstrap(ctx, ba); }; });

  DataArgs la;
  std::string lr_pred = "all";
  auto* c_lr = app.add_subcommand("lrtest-po", "per-predictor likelihood ratio test of proportional odds");
  add_data_options(c_lr, la);
  c_lr->add_option("--predictor", lr_pred, "predictor name, 1-based index, or 'all'")->capture_default_str();
  c_lr->callback([&] { action = [&] { cmd_lrtest(ctx, la, lr_pred); }; });

  StudyArgs sa;
  auto* c_study = app.add_subcommand("study", "simulation studies");
  c_study->require_subcommand(1);
  auto study_common = [&](CLI::App* c) {
    c->add_option("--truth", sa.truth, "mlr or clpo")->check(CLI::IsMember({"mlr", "clpo", "cl-po"}))->capture_default_str();
    c->add_option("--scenario", sa.scenarios, "scenario number, comma list, or 'all'")->capture_default_str();
    c->add_option("--families", sa.families, "comma list, 'main' or 'all'")->capture_default_str();
  };
  auto* c_large = c_study->add_subcommand("large-sample", "apparent performance on one large dataset");
  study_common(c_large);
  c_large->add_option("--n", sa.n, "dataset size")->capture_default_str();
  c_large->add_option("--setup", sa.setup, "flexible recalibration setup for ECI")->capture_default_str();
  c_large->callback([&] { action = [&] { cmd_large(ctx, sa); }; });
  auto* c_small = c_study->add_subcommand("small-sample", "develop on small samples, validate on a large one");
  study_common(c_small);
  c_small->add_option("--n-dev", sa.n_dev, "development size")->capture_default_str();
  c_small->add_option("--reps", sa.reps, "replicates")->capture_default_str();
  c_small->add_option("--n-eval", sa.n_eval, "evaluation size")->capture_default_str();
  c_small->callback([&] { action = [&] { cmd_small(ctx, sa); }; });

  auto* c_scen = app.add_subcommand("scenarios", "built-in simulation scenarios");
  c_scen->require_subcommand(1);
  bool scen_file = false;
  auto* c_list = c_scen->add_subcommand("list", "list scenarios");
  c_list->add_flag("--write", scen_file, "write into --out-dir instead of stdout");
  c_list->callback([&] { action = [&] { cmd_scenarios(ctx, scen_file); }; });

  std::string report_in;
  bool report_file = false;
  auto* c_rep = app.add_subcommand("report", "render a study result as a table");
  c_rep->add_option("--input", report_in, "study.json")->required()->check(CLI::ExistingFile);
  c_rep->add_flag("--write", report_file, "write into --out-dir instead of stdout");
  c_rep->callback([&] { action = [&] { cmd_report(ctx, report_in, report_file); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUserError;
  }
  if (*seed_opt) ctx.seed_flag = seed_value;

  try {
    if (!action) throw DataError("no command given");
    action();
    return kOk;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  }
}

}  // namespace ordcal::cli
