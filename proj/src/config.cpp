#include "vbvar/config.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

namespace vbvar {

namespace {

class Section {
 public:
  Section(const json& j, std::string where, std::vector<std::string>& errs)
      : j_(j), where_(std::move(where)), errs_(errs), ok_(j.is_object()) {
    if (!ok_) errs_.push_back(where_ + ": expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    if (!ok_) return;
    std::set<std::string> k(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!k.count(it.key())) errs_.push_back(where_ + ": unknown key '" + it.key() + "'");
  }

  const json* find(const char* key) const {
    if (!ok_ || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void get(const char* key, double& out) {
    if (auto* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else bad(key, "a number");
    }
  }
  void get(const char* key, int& out) {
    if (auto* v = find(key)) {
      if (v->is_number_integer()) out = v->get<int>();
      else bad(key, "an integer");
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (auto* v = find(key)) {
      if (v->is_number_unsigned()) out = v->get<std::uint64_t>();
      else bad(key, "a non-negative integer");
    }
  }
  void get(const char* key, bool& out) {
    if (auto* v = find(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else bad(key, "true or false");
    }
  }
  void get(const char* key, std::string& out) {
    if (auto* v = find(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else bad(key, "a string");
    }
  }
  void get(const char* key, std::vector<std::string>& out) {
    if (auto* v = find(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_string(); })) {
        bad(key, "a list of strings");
        return;
      }
      out = v->get<std::vector<std::string>>();
    }
  }
  template <class E, class F>
  void get_enum(const char* key, E& out, F from) {
    std::string s;
    if (!find(key)) return;
    get(key, s);
    if (s.empty()) return;
    try {
      out = from(s);
    } catch (const ValidationError& e) {
      errs_.push_back(path(key) + ": " + e.what());
    }
  }

 private:
  void bad(const char* key, const char* what) { errs_.push_back(path(key) + ": expected " + what); }

  const json& j_;
  std::string where_;
  std::vector<std::string>& errs_;
  bool ok_;
};

ModelSpec parse_model(const json& j, ModelSpec m, const std::string& where,
                      std::vector<std::string>& errs) {
  Section s(j, where, errs);
  s.allow({"prior", "parametrization", "factorization", "predictive", "n_draws", "max_joint_dim",
           "hyper", "convergence"});
  s.get_enum("prior", m.prior, prior_from_string);
  s.get_enum("parametrization", m.parametrization, parametrization_from_string);
  s.get_enum("factorization", m.factorization, factorization_from_string);
  s.get_enum("predictive", m.predictive, predictive_from_string);
  s.get("n_draws", m.n_draws);
  s.get("max_joint_dim", m.max_joint_dim);
  if (auto* h = s.find("hyper")) {
    Section hs(*h, s.path("hyper"), errs);
    hs.allow({"a_nu", "b_nu", "tau", "upsilon", "h1", "h2", "h3"});
    hs.get("a_nu", m.hyper.a_nu);
    hs.get("b_nu", m.hyper.b_nu);
    hs.get("tau", m.hyper.tau);
    hs.get("upsilon", m.hyper.upsilon0);
    hs.get("h1", m.hyper.h1);
    hs.get("h2", m.hyper.h2);
    hs.get("h3", m.hyper.h3);
  }
  if (auto* c = s.find("convergence")) {
    Section cs(*c, s.path("convergence"), errs);
    cs.allow({"max_iter", "tol_elbo", "tol_param"});
    cs.get("max_iter", m.convergence.max_iter);
    cs.get("tol_elbo", m.convergence.tol_elbo);
    cs.get("tol_param", m.convergence.tol_param);
  }
  return m;
}

const std::set<std::string> kCommands{"fit", "simulate", "backtest", "predict"};

}  // namespace

std::vector<EstimatorSpec> RunConfig::resolved_estimators() const {
  if (!estimators.empty()) return estimators;
  return {EstimatorSpec{to_string(model.prior) + "_" + to_string(model.parametrization), model}};
}

RunConfig parse_config(const json& j, std::vector<std::string>& errs) {
  RunConfig c;
  Section top(j, "config", errs);
  top.allow({"command", "data", "output_dir", "seed", "threads", "verbosity", "write_timing",
             "model", "estimators", "scenario", "backtest", "predict"});
  top.get("command", c.command);
  top.get("output_dir", c.output_dir);
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  top.get("verbosity", c.verbosity);
  top.get("write_timing", c.write_timing);
  if (auto* d = top.find("data")) {
    Section s(*d, "data", errs);
    s.allow({"path", "returns", "predictors", "size_path"});
    s.get("path", c.data.path);
    s.get("returns", c.data.returns);
    s.get("predictors", c.data.predictors);
    s.get("size_path", c.data.size_path);
  }
  if (auto* m = top.find("model")) c.model = parse_model(*m, c.model, "model", errs);
  if (auto* e = top.find("estimators")) {
    if (!e->is_array()) {
      errs.push_back("estimators: expected a list");
    } else {
      for (size_t i = 0; i < e->size(); ++i) {
        const std::string where = "estimators[" + std::to_string(i) + "]";
        Section s((*e)[i], where, errs);
        s.allow({"name", "model"});
        EstimatorSpec est{"", c.model};
        s.get("name", est.name);
        if (auto* m = s.find("model")) est.model = parse_model(*m, c.model, where + ".model", errs);
        c.estimators.push_back(std::move(est));
      }
    }
  }
  if (auto* sc = top.find("scenario")) {
    Section s(*sc, "scenario", errs);
    s.allow({"d", "T", "sparsity", "n_reps", "burn_in", "intercept", "noise_precision"});
    s.get("d", c.scenario.d);
    s.get("T", c.scenario.T);
    s.get("sparsity", c.scenario.sparsity);
    s.get("n_reps", c.scenario.n_reps);
    s.get("burn_in", c.scenario.burn_in);
    s.get("intercept", c.scenario.intercept);
    if (auto* np = s.find("noise_precision")) {
      try {
        c.scenario.noise_precision = mat_from_json(*np);
      } catch (const ValidationError& ex) {
        errs.push_back(std::string("scenario.noise_precision: ") + ex.what());
      }
    }
  }
  if (auto* bt = top.find("backtest")) {
    Section s(*bt, "backtest", errs);
    s.allow({"window", "risk_aversion", "tc_bps", "weight_bounds", "weighting", "return_scale"});
    s.get("window", c.backtest.window);
    s.get("risk_aversion", c.backtest.risk_aversion);
    s.get("tc_bps", c.backtest.tc_bps);
    s.get("return_scale", c.backtest.return_scale);
    s.get_enum("weighting", c.backtest.weighting, weighting_from_string);
    if (auto* wb = s.find("weight_bounds")) {
      if (wb->is_array() && wb->size() == 2 && (*wb)[0].is_number() && (*wb)[1].is_number()) {
        c.backtest.weight_lo = (*wb)[0].get<double>();
        c.backtest.weight_hi = (*wb)[1].get<double>();
      } else {
        errs.push_back("backtest.weight_bounds: expected [lo, hi]");
      }
    }
  }
  if (auto* pr = top.find("predict")) {
    Section s(*pr, "predict", errs);
    s.allow({"holdout"});
    s.get("holdout", c.predict_holdout);
  }
  auto est = c.resolved_estimators();
  c.scenario.estimators = est;
  c.scenario.seed = c.seed;
  c.backtest.estimators = est;
  c.backtest.seed = c.seed;
  return c;
}

std::vector<std::string> validate_config(const RunConfig& c) {
  std::vector<std::string> e;
  if (!kCommands.count(c.command))
    e.push_back("command: must be one of fit, simulate, backtest, predict (got '" + c.command + "')");
  if (c.threads < 0) e.push_back("threads: must be >= 0");
  if (c.verbosity < 0 || c.verbosity > 3) e.push_back("verbosity: must lie in 0..3");
  if (c.output_dir.empty()) e.push_back("output_dir: must not be empty");
  if (c.predict_holdout < 0) e.push_back("predict.holdout: must be >= 0");
  for (const auto& m : c.model.errors()) e.push_back("model: " + m);

  std::set<std::string> names;
  for (const auto& est : c.estimators) {
    if (est.name.empty()) e.push_back("estimators: every estimator needs a name");
    else if (!names.insert(est.name).second) e.push_back("estimators: duplicate name '" + est.name + "'");
  }
  ScenarioSpec sc = c.scenario;
  sc.estimators = c.resolved_estimators();
  for (const auto& m : sc.errors()) e.push_back("scenario: " + m);
  BacktestSpec bt = c.backtest;
  bt.estimators = sc.estimators;
  for (const auto& m : bt.errors(-1, -1)) e.push_back("backtest: " + m);
  if (bt.weighting == Weighting::Size && c.data.size_path.empty() && c.command == "backtest")
    e.push_back("data.size_path: required for size weighting");

  const bool reads = c.command == "fit" || c.command == "backtest" || c.command == "predict";
  if (reads && c.data.path.empty()) e.push_back("data.path: required for the " + c.command + " command");
  if (!c.data.path.empty() && !std::filesystem::exists(c.data.path))
    e.push_back("data.path: file not found: " + c.data.path);
  if (!c.data.size_path.empty() && !std::filesystem::exists(c.data.size_path))
    e.push_back("data.size_path: file not found: " + c.data.size_path);
  return e;
}

std::vector<std::string> validate_config(const json& j) {
  std::vector<std::string> errs;
  RunConfig c = parse_config(j, errs);
  for (auto& m : validate_config(c)) errs.push_back(std::move(m));
  return errs;
}

RunConfig load_config(const std::string& path) {
  json j = read_json(path);
  std::vector<std::string> errs;
  RunConfig c = parse_config(j, errs);
  for (auto& m : validate_config(c)) errs.push_back(std::move(m));
  if (!errs.empty()) {
    std::string msg = path + ": invalid config";
    for (const auto& m : errs) msg += "\n  " + m;
    throw ValidationError(msg);
  }
  return c;
}

json default_config_json() {
  RunConfig c;
  json j;
  j["command"] = c.command;
  j["data"] = {{"path", ""}, {"returns", json::array()}, {"predictors", json::array()}, {"size_path", ""}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["verbosity"] = c.verbosity;
  j["write_timing"] = c.write_timing;
  json m = to_json(c.model);
  j["model"] = m;
  j["estimators"] = json::array();
  j["scenario"] = {{"d", c.scenario.d},           {"T", c.scenario.T},
                   {"sparsity", c.scenario.sparsity}, {"n_reps", c.scenario.n_reps},
                   {"burn_in", c.scenario.burn_in}, {"intercept", c.scenario.intercept}};
  j["backtest"] = {{"window", c.backtest.window},
                   {"risk_aversion", c.backtest.risk_aversion},
                   {"tc_bps", c.backtest.tc_bps},
                   {"weight_bounds", {c.backtest.weight_lo, c.backtest.weight_hi}},
                   {"weighting", to_string(c.backtest.weighting)},
                   {"return_scale", c.backtest.return_scale}};
  j["predict"] = {{"holdout", c.predict_holdout}};
  return j;
}

}  // namespace vbvar
