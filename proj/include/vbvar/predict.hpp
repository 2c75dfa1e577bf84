#pragma once

#include "vbvar/cavi.hpp"
#include "vbvar/posterior.hpp"
#include "vbvar/rng.hpp"

#include <vector>

namespace vbvar {

struct PredictiveDensity {
  PredictiveKind kind = PredictiveKind::Gaussian;
  Vec mean;  // exact for Gaussian, mixture moments for the MC kinds
  Mat cov;
  Mat draws;  // N x d predictive sample (MC kinds)
  // mixture components: location per draw; McXi keeps each draw's precision,
  // McTheta shares the Student-t scale S with v degrees of freedom
  Mat locs;
  std::vector<Mat> precisions;
  double v = 0.0;
  Mat S;
};

PredictiveDensity predict_mc_xi(const FitResult& fit, const Vec& z, int n, CounterRng& rng);
PredictiveDensity predict_mc_theta(const FitResult& fit, const WishartApprox& w, const Vec& z,
                                   int n, CounterRng& rng);
PredictiveDensity predict_gaussian(const FitResult& fit, const WishartApprox& w, const Vec& z);

// dispatch on fit.spec.predictive
PredictiveDensity predict(const FitResult& fit, const WishartApprox& w, const Vec& z,
                          CounterRng& rng);

double log_density(const PredictiveDensity& pd, const Vec& y);
double log_predictive_score(const PredictiveDensity& pd, const Vec& y);

// P(|y_i - center| > half_width) under the predictive
double marginal_tail_mass(const PredictiveDensity& pd, int i, double center, double half_width);

double mvn_log_density(const Vec& y, const Vec& mean, const Mat& cov);
double mvt_log_density(const Vec& y, const Vec& loc, const Mat& scale, double v);

}  // namespace vbvar
