#pragma once

#include "vbvar/cavi.hpp"
#include "vbvar/posterior.hpp"
#include "vbvar/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vbvar {

struct EstimatorSpec {
  std::string name;
  ModelSpec model;
};

struct ScenarioSpec {
  int d = 15;
  int T = 360;
  double sparsity = 0.9;
  int n_reps = 20;
  std::uint64_t seed = 1;
  int burn_in = 200;
  double intercept = 0.0;
  Mat noise_precision;  // empty = identity
  std::vector<EstimatorSpec> estimators;

  std::vector<std::string> errors() const;
};

struct F1Result {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct ScenarioRecord {
  int rep = 0;
  std::string estimator;
  Prior prior = Prior::Normal;
  Parametrization parametrization = Parametrization::DirectTheta;
  double frobenius = 0.0;
  F1Result f1;
  double wall_time_seconds = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct ScenarioResult {
  std::vector<ScenarioRecord> records;  // ordered by (rep, estimator)
};

int zero_count(int d, double s);  // round-half-up of s d^2
Mat generate_theta(int d, double s, CounterRng& rng);
// theta: d x d autoregressive block, or d x (d+1) with intercept column first
Dataset simulate_var(const Mat& theta, int T, const Mat& noise_precision, CounterRng& rng,
                     int burn_in = 200);
double frobenius_error(const Mat& theta_true, const Mat& theta_hat);
F1Result f1_score(const BoolMat& mask_true, const BoolMat& mask_hat);

ScenarioResult run_scenario(const ScenarioSpec& spec, int threads = 1);

}  // namespace vbvar
