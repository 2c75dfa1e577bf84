#include "vbvar/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <thread>

namespace fs = std::filesystem;

namespace vbvar {

namespace {

void setup_logging(int verbosity) {
  auto logger = spdlog::get("vbvar");
  if (!logger) {
    logger = spdlog::stderr_color_mt("vbvar");
    spdlog::set_default_logger(logger);
  }
  static const spdlog::level::level_enum by_verbosity[] = {
      spdlog::level::warn, spdlog::level::info, spdlog::level::debug, spdlog::level::trace};
  auto level = by_verbosity[std::clamp(verbosity, 0, 3)];
  if (const char* env = std::getenv("VBVAR_LOG_LEVEL"))
    level = spdlog::level::from_str(env);
  spdlog::set_level(level);
}

int thread_count(const RunConfig& c) {
  if (c.threads > 0) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

void prepare_output(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec || !fs::is_directory(c.output_dir))
    throw ValidationError("cannot create output directory: " + c.output_dir);
}

Dataset load_data(const RunConfig& c) {
  if (!fs::exists(c.data.path)) throw ValidationError("input file not found: " + c.data.path);
  return load_dataset(c.data.path, c.data.returns, c.data.predictors);
}

Vec regressor_at(const Dataset& ds, int t) {
  Vec z(ds.q());
  z(0) = 1.0;
  if (ds.p() > 0) z.segment(1, ds.p()) = ds.x.row(t).transpose();
  z.tail(ds.d()) = ds.y.row(t).transpose();
  return z;
}

void log_trace(const RunConfig& c, const FitResult& f) {
  if (c.verbosity < 2) return;
  const auto& tr = f.state.elbo_trace;
  for (size_t i = 0; i < tr.size(); ++i) spdlog::info("elbo[{}] = {}", i + 1, format_double(tr[i]));
}

void write_timing(const RunConfig& c, const json& j) {
  if (c.write_timing) write_json(out_path(c, "timing.json"), j);
}

}  // namespace

void run_fit(const RunConfig& c) {
  Dataset ds = load_data(c);
  prepare_output(c);
  spdlog::info("fit: T={} d={} p={} prior={} parametrization={}", ds.T(), ds.d(), ds.p(),
               to_string(c.model.prior), to_string(c.model.parametrization));
  FitResult f = fit(ds, c.model);
  log_trace(c, f);
  if (!f.converged) spdlog::warn("fit did not converge in {} sweeps", f.iterations);
  PosteriorSummary post = summarize(f);
  write_json(out_path(c, "fit.json"), fit_to_json(f, post, ds));
  write_timing(c, {{"wall_time_seconds", f.wall_time_seconds}});
}

void run_simulate(const RunConfig& c) {
  prepare_output(c);
  const auto& sc = c.scenario;
  spdlog::info("simulate: d={} T={} sparsity={} reps={} estimators={}", sc.d, sc.T, sc.sparsity,
               sc.n_reps, sc.estimators.size());
  ScenarioResult res = run_scenario(sc, thread_count(c));

  CsvTable t{{"rep", "estimator", "prior", "parametrization", "metric", "value"}, {}};
  CsvTable timing{{"rep", "estimator", "wall_time_seconds"}, {}};
  std::map<std::string, std::map<std::string, std::vector<double>>> pooled;
  for (const auto& r : res.records) {
    auto add = [&](const std::string& metric, double v) {
      t.rows.push_back({std::to_string(r.rep), r.estimator, to_string(r.prior),
                        to_string(r.parametrization), metric, format_double(v)});
      if (!r.failed) pooled[r.estimator][metric].push_back(v);
    };
    if (r.failed) {
      spdlog::warn("rep {} estimator {} failed: {}", r.rep, r.estimator, r.error);
      add("failed", 1.0);
      continue;
    }
    add("failed", 0.0);
    add("frobenius", r.frobenius);
    add("f1", r.f1.f1);
    add("precision", r.f1.precision);
    add("recall", r.f1.recall);
    add("iterations", r.iterations);
    add("converged", r.converged ? 1.0 : 0.0);
    timing.rows.push_back({std::to_string(r.rep), r.estimator, format_double(r.wall_time_seconds)});
  }
  write_csv(out_path(c, "scenario.csv"), t);

  CsvTable s{{"estimator", "metric", "median", "n"}, {}};
  for (const auto& est : sc.estimators) {
    for (const char* metric : {"frobenius", "f1", "precision", "recall", "iterations"}) {
      auto v = pooled[est.name][metric];
      double med = NAN;
      if (!v.empty()) {
        std::sort(v.begin(), v.end());
        size_t n = v.size();
        med = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
      }
      s.rows.push_back({est.name, metric, format_double(med), std::to_string(v.size())});
    }
  }
  write_csv(out_path(c, "scenario_summary.csv"), s);
  if (c.write_timing) write_csv(out_path(c, "timing.csv"), timing);
}

void run_backtest(const RunConfig& c) {
  Dataset ds = load_data(c);
  BacktestSpec spec = c.backtest;
  if (spec.weighting == Weighting::Size)
    spec.size = load_panel(c.data.size_path, ds.y_labels, ds.T());
  auto errs = spec.errors(ds.T(), ds.d());
  if (!errs.empty()) throw ValidationError("backtest: " + errs.front());
  prepare_output(c);
  spdlog::info("backtest: T={} d={} window={} forecasts={} estimators={}", ds.T(), ds.d(),
               spec.window, ds.T() - spec.window, spec.estimators.size());
  auto t0 = std::chrono::steady_clock::now();
  BacktestReport rep = vbvar::run_backtest(ds, spec, thread_count(c));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  CsvTable fc{{"date", "asset", "estimator", "forecast", "naive", "realized"}, {}};
  CsvTable cs{{"date", "estimator", "value"}, {}};
  json metrics;
  metrics["assets"] = ds.y_labels;
  metrics["window"] = spec.window;
  metrics["risk_aversion"] = spec.risk_aversion;
  metrics["tc_bps"] = spec.tc_bps;
  metrics["weight_bounds"] = {spec.weight_lo, spec.weight_hi};
  metrics["weighting"] = to_string(spec.weighting);
  metrics["return_scale"] = spec.return_scale;
  metrics["transaction_costs"] =
      "tc_bps * 1e-4 * sum_i |w_it - w_i,t-1 drifted|, drifted w = w (1 + r) / (1 + w'r); "
      "first period trades from zero holdings; applied to model and naive portfolios alike";
  metrics["cer"] = "CRRA certainty equivalent of net monthly returns, difference x 1200";
  json ests = json::array();
  for (size_t e = 0; e < rep.panels.size(); ++e) {
    const auto& p = rep.panels[e];
    const auto& r = rep.estimators[e];
    for (size_t k = 0; k < p.dates.size(); ++k) {
      for (int i = 0; i < ds.d(); ++i)
        fc.rows.push_back({p.dates[k], ds.y_labels[i], p.estimator, format_double(p.forecast(k, i)),
                           format_double(p.naive(k, i)), format_double(p.realized(k, i))});
      cs.rows.push_back({p.dates[k], p.estimator, format_double(r.cum_sse(k))});
    }
    json je;
    je["estimator"] = r.estimator;
    je["model"] = to_json(spec.estimators[e].model);
    je["r2_oos"] = to_json(r.r2);
    je["r2_oos_weighted"] = r.r2_weighted;
    je["cer_diff"] = to_json(r.cer_diff);
    je["cer_diff_multi"] = r.cer_diff_multi;
    je["mean_turnover_model"] = r.model_portfolio.turnover.mean();
    je["mean_turnover_naive"] = r.naive_portfolio.turnover.mean();
    je["ridged_covariances"] = r.model_portfolio.ridged;
    je["carried_forward"] = r.carried_forward;
    ests.push_back(std::move(je));
  }
  metrics["estimators"] = ests;
  write_csv(out_path(c, "forecasts.csv"), fc);
  write_csv(out_path(c, "cumsse.csv"), cs);
  write_json(out_path(c, "metrics.json"), metrics);
  write_timing(c, {{"wall_time_seconds", secs}});
}

void run_predict(const RunConfig& c) {
  Dataset ds = load_data(c);
  const int h = c.predict_holdout;
  const int T = ds.T();
  if (T - h < 3) throw ValidationError("predict: holdout leaves fewer than 3 estimation rows");
  prepare_output(c);
  Dataset train = slice_rows(ds, 0, T - h);
  FitResult f = fit(train, c.model);
  log_trace(c, f);
  WishartApprox w = fit_wishart(f);

  std::vector<int> targets;
  for (int t = T - h; t < T; ++t) targets.push_back(t);
  if (h == 0) targets.push_back(T);

  CsvTable tab{{"date", "asset", "mean", "variance", "realized", "log_score"}, {}};
  json out;
  out["model"] = to_json(c.model);
  out["returns"] = ds.y_labels;
  out["estimation_rows"] = T - h;
  out["wishart_delta"] = w.delta_hat;
  json rows = json::array();
  for (int t : targets) {
    CounterRng rng(c.seed, 0, static_cast<std::uint64_t>(t));
    PredictiveDensity pd = predict(f, w, regressor_at(ds, t - 1), rng);
    const bool has_y = t < T;
    const std::string date = has_y ? ds.time_index[t] : "next";
    double score = NAN;
    if (has_y) score = log_predictive_score(pd, ds.y.row(t).transpose());
    for (int i = 0; i < ds.d(); ++i)
      tab.rows.push_back({date, ds.y_labels[i], format_double(pd.mean(i)), format_double(pd.cov(i, i)),
                          has_y ? format_double(ds.y(t, i)) : "", has_y ? format_double(score) : ""});
    json r;
    r["date"] = date;
    r["mean"] = to_json(pd.mean);
    r["cov"] = to_json(pd.cov);
    if (has_y) {
      r["realized"] = to_json(Vec(ds.y.row(t).transpose()));
      r["log_score"] = score;
    }
    rows.push_back(std::move(r));
  }
  out["predictions"] = rows;
  write_csv(out_path(c, "predictive.csv"), tab);
  write_json(out_path(c, "predictive.json"), out);
  write_timing(c, {{"wall_time_seconds", f.wall_time_seconds}});
}

int run(const CliOptions& o) {
  setup_logging(1);
  try {
    json j = read_json(o.config_path);
    // command-line flags override the file before validation
    if (j.is_object()) {
      if (!o.command.empty()) j["command"] = o.command;
      if (o.seed) j["seed"] = *o.seed;
      if (o.threads) j["threads"] = *o.threads;
      if (o.out) j["output_dir"] = *o.out;
    }
    std::vector<std::string> errs;
    RunConfig cfg = parse_config(j, errs);
    for (auto& m : validate_config(cfg)) errs.push_back(std::move(m));
    setup_logging(cfg.verbosity);
    if (!errs.empty()) {
      for (const auto& m : errs) spdlog::error("{}", m);
      return kExitValidation;
    }
    if (cfg.command == "fit") run_fit(cfg);
    else if (cfg.command == "simulate") run_simulate(cfg);
    else if (cfg.command == "backtest") run_backtest(cfg);
    else run_predict(cfg);
    return kExitOk;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const NumericalFault& e) {
    spdlog::error("numerical fault: {}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kExitNumerical;
  }
}

int run(const std::string& config_path) {
  CliOptions o;
  o.config_path = config_path;
  return run(o);
}

}  // namespace vbvar
