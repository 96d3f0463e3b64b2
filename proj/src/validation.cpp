#include "ordcal/validation.hpp"
#include "ordcal/metrics.hpp"
#include "ordcal/rng.hpp"
#include "ordcal/serialization.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

namespace ordcal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Offset between the evaluation-set stream and replicate streams.
constexpr std::uint64_t kEvalStream = 0x5EEDE7A100000000ULL;

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(jobs, 1)));
}

// Runs body(i) for i in [0, jobs) on a small pool. Exceptions escaping body are
// rethrown after all workers stop.
void parallel_for(std::size_t jobs, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned t = worker_count(threads, jobs);
  if (t <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < t; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < jobs;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

bool all_categories(const Eigen::VectorXi& y, int K) {
  return (category_counts(y, K).array() > 0).all();
}

Evaluation empty_evaluation(int K) {
  Evaluation e;
  e.category_intercept = e.category_slope = Eigen::VectorXd::Constant(K, kNaN);
  e.dichotomy_intercept = e.dichotomy_slope = Eigen::VectorXd::Constant(K - 1, kNaN);
  e.lp_intercept = e.lp_slope = Eigen::VectorXd::Constant(K - 1, kNaN);
  return e;
}

// Mean over finite values; NaN if there are none.
double finite_mean(const std::vector<double>& v, int* used = nullptr) {
  double s = 0;
  int c = 0;
  for (double x : v)
    if (std::isfinite(x)) s += x, ++c;
  if (used) *used = c;
  return c ? s / c : kNaN;
}

std::string message_of(const std::exception& e) { return e.what(); }

}  // namespace

Evaluation evaluate(const FittedModel& model, const Dataset& data, const ProbMatrix* truth,
                    const EvaluationOptions& options) {
  const int K = model.K;
  if (data.K != K) throw DataError("evaluation data has K=" + std::to_string(data.K) + ", model has K=" + std::to_string(K));
  Evaluation e = empty_evaluation(K);
  const ProbMatrix probs = predict_probs(model, data.predictors);
  if (!probs.all_valid())
    e.warnings.push_back(std::to_string((!probs.valid).count()) + " rows with negative estimated risks");
  const Eigen::VectorXi& y = data.outcomes;

  for (int k = 1; k <= K; ++k) {
    try {
      const auto w = weak_calibration(probs, y, {TargetKind::category, k});
      e.category_intercept(k - 1) = w.intercept;
      e.category_slope(k - 1) = w.slope;
      if (!w.converged) e.warnings.push_back(w.target.label() + ": " + w.message);
    } catch (const Error& err) {
      e.warnings.push_back(message_of(err));
    }
  }
  for (int k = 2; k <= K; ++k) {
    if (k == K) {
      // V_K = P_K: same fit as category K
      e.dichotomy_intercept(k - 2) = e.category_intercept(K - 1);
      e.dichotomy_slope(k - 2) = e.category_slope(K - 1);
      continue;
    }
    try {
      const auto w = weak_calibration(probs, y, {TargetKind::dichotomy, k});
      e.dichotomy_intercept(k - 2) = w.intercept;
      e.dichotomy_slope(k - 2) = w.slope;
      if (!w.converged) e.warnings.push_back(w.target.label() + ": " + w.message);
    } catch (const Error& err) {
      e.warnings.push_back(message_of(err));
    }
  }
  if (options.model_specific) {
    try {
      const auto ms = model_specific_calibration(model.spec, linear_predictors(model, data.predictors), y, K);
      for (int j = 0; j < K - 1; ++j) {
        const auto& w = ms[static_cast<size_t>(j)];
        if (!w.converged) {
          e.warnings.push_back(w.target.label() + ": " + w.message);
          continue;
        }
        e.lp_intercept(j) = w.intercept;
        e.lp_slope(j) = w.slope;
      }
    } catch (const Error& err) {
      e.warnings.push_back("model-specific calibration: " + message_of(err));
    }
  }
  if (options.eci) {
    try {
      const auto rec = flexible_recalibration(probs, y, options.setup);
      e.eci = eci(probs, rec, y, EciVariant::rescaled);
    } catch (const Error& err) {
      e.warnings.push_back("ECI: " + message_of(err));
    }
  }
  if (truth) e.rmspe = rmspe(probs, *truth);
  const auto o = orc_detail(expected_outcome_score(probs), y, K);
  e.orc = o.value;
  for (const auto& w : o.warnings) e.warnings.push_back(w);
  return e;
}

std::vector<PerformanceRow> large_sample_study(const std::vector<Scenario>& scenarios,
                                               const std::vector<ModelSpec>& families,
                                               const LargeSampleOptions& options) {
  std::vector<PerformanceRow> rows;
  for (const auto& sc : scenarios) {
    const SimulatedData sim = generate(sc, options.n, options.seed);
    for (const auto& spec : families) {
      PerformanceRow row;
      row.scenario_id = sc.id;
      row.spec = spec;
      row.K = sc.K;
      row.n_dev = row.n_eval = options.n;
      row.mean = empty_evaluation(sc.K);
      try {
        const FittedModel m = fit(sim.data, spec, options.fit);
        row.converged = m.converged;
        if (!m.converged) row.failure_log.push_back("fit did not converge: " + m.diagnostics.message);
        for (const auto& w : m.diagnostics.warnings) row.mean.warnings.push_back(w);
        Evaluation e = evaluate(m, sim.data, &sim.truth, options.evaluation);
        e.warnings.insert(e.warnings.begin(), row.mean.warnings.begin(), row.mean.warnings.end());
        row.mean = e;
        row.per_replicate.push_back(e);
        row.replicates = 1;
      } catch (const Error& err) {
        row.failures = 1;
        row.converged = false;
        row.failure_log.push_back(message_of(err));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<PerformanceRow> small_sample_study(const Scenario& scenario,
                                               const std::vector<ModelSpec>& families,
                                               const SmallSampleOptions& options) {
  if (options.reps < 1) throw DataError("small-sample study needs reps >= 1");
  if (options.n_dev < 2) throw DataError("small-sample study needs n_dev >= 2");
  const int K = scenario.K;
  const std::uint64_t eval_seed = options.eval_seed.value_or(options.seed ^ kEvalStream);
  const SimulatedData eval_set = generate(scenario, options.n_eval, eval_seed);

  const auto reps = static_cast<std::size_t>(options.reps);
  const std::size_t F = families.size();
  struct Cell {
    std::optional<Evaluation> eval;
    std::string failure;
  };
  std::vector<Cell> cells(reps * F);
  std::vector<int> redraws(reps, 0);

  parallel_for(reps, options.threads, [&](std::size_t r) {
    // redraw until every category is present
    SimulatedData dev;
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      const std::uint64_t s = replicate_seed(options.seed, r + static_cast<std::uint64_t>(attempt) * reps);
      dev = generate(scenario, options.n_dev, s);
      ok = all_categories(dev.data.outcomes, K);
      if (!ok) ++redraws[r];
    }
    for (std::size_t f = 0; f < F; ++f) {
      Cell& c = cells[r * F + f];
      if (!ok) {
        c.failure = "no dataset with every category after 1000 draws";
        continue;
      }
      try {
        const FittedModel m = fit(dev.data, families[f], options.fit);
        if (!m.converged) {
          c.failure = "fit did not converge" + (m.diagnostics.message.empty() ? "" : ": " + m.diagnostics.message);
          continue;
        }
        c.eval = evaluate(m, eval_set.data, &eval_set.truth, options.evaluation);
      } catch (const Error& err) {
        c.failure = message_of(err);
      }
    }
  });

  std::vector<PerformanceRow> rows;
  for (std::size_t f = 0; f < F; ++f) {
    PerformanceRow row;
    row.scenario_id = scenario.id;
    row.spec = families[f];
    row.K = K;
    row.n_dev = options.n_dev;
    row.n_eval = options.n_eval;
    for (std::size_t r = 0; r < reps; ++r) {
      row.redraws += redraws[r];
      const Cell& c = cells[r * F + f];
      if (c.eval) {
        row.per_replicate.push_back(*c.eval);
      } else {
        ++row.failures;
        row.failure_log.push_back("replicate " + std::to_string(r) + ": " + c.failure);
      }
    }
    row.replicates = static_cast<int>(row.per_replicate.size());
    row.mean = empty_evaluation(K);
    const int params = param_count(families[f], scenario.Q, K);
    if (options.n_dev < params + 10)
      row.mean.warnings.push_back("n_dev below parameter count + 10 (" + std::to_string(params) + " parameters)");

    auto average = [&](auto member, Eigen::VectorXd& out, bool slope) {
      for (Eigen::Index t = 0; t < out.size(); ++t) {
        std::vector<double> v;
        for (const auto& e : row.per_replicate) {
          const double x = (e.*member)(t);
          if (slope && std::isfinite(x) && std::abs(x) > options.slope_limit) {
            ++row.excluded_slopes;
            continue;
          }
          v.push_back(x);
        }
        out(t) = finite_mean(v);
      }
    };
    average(&Evaluation::category_intercept, row.mean.category_intercept, false);
    average(&Evaluation::category_slope, row.mean.category_slope, true);
    average(&Evaluation::dichotomy_intercept, row.mean.dichotomy_intercept, false);
    average(&Evaluation::dichotomy_slope, row.mean.dichotomy_slope, true);
    average(&Evaluation::lp_intercept, row.mean.lp_intercept, false);
    average(&Evaluation::lp_slope, row.mean.lp_slope, true);
    std::vector<double> eci_v, rmspe_v, orc_v;
    for (const auto& e : row.per_replicate) {
      eci_v.push_back(e.eci);
      rmspe_v.push_back(e.rmspe);
      orc_v.push_back(e.orc);
    }
    row.mean.eci = finite_mean(eci_v);
    row.mean.rmspe = finite_mean(rmspe_v);
    row.mean.orc = finite_mean(orc_v);
    if (row.excluded_slopes)
      row.mean.warnings.push_back(std::to_string(row.excluded_slopes) + " slopes with |b| > " +
                                  format_number(options.slope_limit) + " excluded from means");
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::vector<std::string> bootstrap_metric_names(int K) {
  std::vector<std::string> n;
  for (int k = 1; k <= K; ++k) {
    n.push_back("category " + std::to_string(k) + " intercept");
    n.push_back("category " + std::to_string(k) + " slope");
  }
  for (int k = 2; k <= K; ++k) {
    n.push_back("dichotomy >=" + std::to_string(k) + " intercept");
    n.push_back("dichotomy >=" + std::to_string(k) + " slope");
  }
  for (int j = 1; j < K; ++j) {
    n.push_back("LP" + std::to_string(j) + " intercept");
    n.push_back("LP" + std::to_string(j) + " slope");
  }
  n.push_back("ORC");
  return n;
}

std::vector<double> bootstrap_metric_values(const Evaluation& e) {
  std::vector<double> v;
  auto pairs = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      v.push_back(a(i));
      v.push_back(b(i));
    }
  };
  pairs(e.category_intercept, e.category_slope);
  pairs(e.dichotomy_intercept, e.dichotomy_slope);
  pairs(e.lp_intercept, e.lp_slope);
  v.push_back(e.orc);
  return v;
}

}  // namespace

BootstrapResult bootstrap_correct(const Dataset& data, const ModelSpec& spec,
                                  const BootstrapOptions& options) {
  if (options.B < 0) throw DataError("bootstrap needs B >= 0");
  check_dataset(data);
  const int K = data.K;
  const EvaluationOptions eval_opts{false, true, RecalSetup::mlr_reference};
  BootstrapResult res;
  res.spec = spec;
  res.B = options.B;

  const FittedModel apparent_model = fit(data, spec, options.fit);
  if (!apparent_model.converged)
    throw NumericalError("apparent model did not converge: " + apparent_model.diagnostics.message);
  const Evaluation apparent_eval = evaluate(apparent_model, data, nullptr, eval_opts);
  res.warnings = apparent_eval.warnings;
  const auto names = bootstrap_metric_names(K);
  const auto apparent = bootstrap_metric_values(apparent_eval);

  // Resample indices are drawn up front, in order, so the redraw cap is deterministic.
  const auto B = static_cast<std::size_t>(options.B);
  const auto n = data.n();
  std::vector<std::vector<Eigen::Index>> samples;
  const std::size_t cap = 10 * B;
  std::size_t attempts = 0;
  for (std::size_t b = 0; b < B; ++b) {
    bool ok = false;
    while (!ok && attempts < cap) {
      CounterRng rng(replicate_seed(options.seed, attempts));
      ++attempts;
      std::vector<Eigen::Index> rows(static_cast<size_t>(n));
      Eigen::VectorXi counts = Eigen::VectorXi::Zero(K);
      for (auto& i : rows) {
        i = std::min<Eigen::Index>(static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n)), n - 1);
        ++counts(data.outcomes(i) - 1);
      }
      ok = (counts.array() > 0).all();
      if (ok)
        samples.push_back(std::move(rows));
      else
        ++res.redraws;
    }
    if (!ok) {
      res.exhausted = true;
      res.warnings.push_back("redraw cap of " + std::to_string(cap) + " attempts reached after " +
                             std::to_string(samples.size()) + " resamples");
      break;
    }
  }

  struct Pair {
    std::vector<double> boot, test;
    std::string failure;
  };
  std::vector<Pair> out(samples.size());
  parallel_for(samples.size(), options.threads, [&](std::size_t b) {
    try {
      const Dataset d = take_rows(data, samples[b]);
      const FittedModel m = fit(d, spec, options.fit);
      if (!m.converged) {
        out[b].failure = "fit did not converge";
        return;
      }
      out[b].boot = bootstrap_metric_values(evaluate(m, d, nullptr, eval_opts));
      out[b].test = bootstrap_metric_values(evaluate(m, data, nullptr, eval_opts));
    } catch (const Error& err) {
      out[b].failure = message_of(err);
    }
  });

  for (const auto& p : out)
    if (!p.failure.empty()) ++res.failures;
  for (size_t i = 0; i < names.size(); ++i) {
    BootstrapMetric bm;
    bm.name = names[i];
    bm.apparent = apparent[i];
    std::vector<double> diffs;
    for (const auto& p : out)
      if (p.failure.empty()) diffs.push_back(p.boot[i] - p.test[i]);
    const double opt = finite_mean(diffs, &bm.resamples);
    bm.optimism = bm.resamples ? opt : 0.0;
    bm.corrected = bm.apparent - bm.optimism;
    res.metrics.push_back(bm);
  }
  if (res.failures) res.warnings.push_back(std::to_string(res.failures) + " resample fits failed and were skipped");
  return res;
}

std::vector<std::string> performance_columns(int K) {
  std::vector<std::string> c{"scenario", "model", "n_dev", "n_eval", "replicates", "failures", "redraws", "excluded_slopes"};
  for (int k = 1; k <= K; ++k) {
    c.push_back("y" + std::to_string(k) + "_intercept");
    c.push_back("y" + std::to_string(k) + "_slope");
  }
  for (int k = 2; k <= K; ++k) {
    c.push_back("y_ge" + std::to_string(k) + "_intercept");
    c.push_back("y_ge" + std::to_string(k) + "_slope");
  }
  for (int j = 1; j < K; ++j) {
    c.push_back("lp" + std::to_string(j) + "_intercept");
    c.push_back("lp" + std::to_string(j) + "_slope");
  }
  for (const char* s : {"eci", "rmspe", "orc"}) c.push_back(s);
  return c;
}

std::vector<std::string> performance_values(const PerformanceRow& row) {
  auto num = [](double v) { return std::isfinite(v) ? format_number(v) : std::string("NA"); };
  std::vector<std::string> v{row.scenario_id,
                             family_name(row.spec),
                             std::to_string(row.n_dev),
                             std::to_string(row.n_eval),
                             std::to_string(row.replicates),
                             std::to_string(row.failures),
                             std::to_string(row.redraws),
                             std::to_string(row.excluded_slopes)};
  const Evaluation& e = row.mean;
  auto pairs = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      v.push_back(num(a(i)));
      v.push_back(num(b(i)));
    }
  };
  pairs(e.category_intercept, e.category_slope);
  pairs(e.dichotomy_intercept, e.dichotomy_slope);
  pairs(e.lp_intercept, e.lp_slope);
  v.push_back(num(e.eci));
  v.push_back(num(e.rmspe));
  v.push_back(num(e.orc));
  return v;
}

}  // namespace ordcal
