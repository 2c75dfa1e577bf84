#pragma once

#include "vbvar/cavi.hpp"
#include "vbvar/rng.hpp"
#include "vbvar/special_functions.hpp"

#include <cstdint>
#include <vector>

namespace vbvar {

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SparsePattern {
  BoolMat mask;      // true = kept
  Mat theta_sparse;
};

// entry (j,k) is zeroed iff |theta_jk|^3 ||z_k||^2 <= 1
SparsePattern savs(const Mat& theta_hat, const Mat& Z);
SparsePattern savs_from_norms(const Mat& theta_hat, const Vec& z_sq_norms);

struct WishartApprox {
  double delta_hat = 0.0;
  Mat H_hat;
  double e_log_det = 0.0;
  Mat e_omega;
  bool at_boundary = false;
};

// profiled KL objective psi(delta, E[Omega]/delta)
double wishart_objective(double delta, const Mat& e_omega, double e_log_det);
WishartApprox fit_wishart(const Mat& e_omega, double e_log_det);
WishartApprox fit_wishart(const FitResult& fit);

// ACC = 100 (1 - 0.5 int |q - p|), p from a 512-bin histogram of the samples
double approx_accuracy(const std::vector<double>& samples_p, const Fn1& q_density);
// both sides from samples, pooled range
double approx_accuracy(const std::vector<double>& samples_p, const std::vector<double>& samples_q);

// Omega = L'VL with (nu, beta) drawn from q
std::vector<Mat> sample_omega_q(const FitResult& fit, int n, CounterRng& rng);
std::vector<Mat> sample_wishart(double delta, const Mat& H, int n, CounterRng& rng);
double wishart_diag_density(double delta, double h_ii, double w);
// marginal density of an off-diagonal entry W_ij (variance-gamma)
double wishart_offdiag_density(double delta, double h_ii, double h_jj, double h_ij, double w);

// d x d matrix of ACC values: q(Omega) draws of each entry vs the matching Wishart marginal
Mat omega_accuracy(const FitResult& fit, const WishartApprox& w, int n, std::uint64_t seed);

struct PosteriorSummary {
  SparsePattern savs;
  WishartApprox wishart;
};
PosteriorSummary summarize(const FitResult& fit);

}  // namespace vbvar
