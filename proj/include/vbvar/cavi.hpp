#pragma once

#include "vbvar/model.hpp"

#include <vector>

namespace vbvar {

// Prior-specific variational blocks. Grids are d x q, row-major over (equation, regressor).
struct LatentBlock {
  // lasso and normal-gamma: q(upsilon) = GIG(zeta, a, b) and its moments
  Mat gig_zeta, gig_a, gig_b;
  Mat ups_mean, ups_inv, ups_log;
  // lasso: q(lambda^2) = Ga(lam_a, lam_b); normal-gamma: q(lambda) = Ga(lam_a, lam_b)
  Mat lam_a, lam_b;
  // normal-gamma per-row eta summaries
  Vec eta_mean, eta_logc, eta_S;
  // horseshoe: inverse-gamma scales (shapes fixed at 1 except gamma^2)
  Mat hs_ups2_b, hs_lam_b;
  double hs_gam2_a = 0.0, hs_gam2_b = 0.0, hs_eta_b = 0.0;
};

struct VariationalState {
  int d = 0, q = 0, T = 0;
  Vec nu_a, nu_b;
  std::vector<Vec> beta_mu;   // entry j has length j (0-based equation index)
  std::vector<Mat> beta_cov;
  Vec theta_mu;               // vec(Theta'), row-major, length d*q
  Mat theta_cov;              // joint factorization: (dq x dq)
  std::vector<Mat> theta_cov_rows;  // row factorization: d blocks of q x q
  double theta_logdet = 0.0;  // log |Sigma_theta|
  bool joint = true;
  LatentBlock latents;
  std::vector<double> elbo_trace;

  Mat theta_mean() const;  // d x q
  Mat cov_block(int i, int k) const;
  Mat theta_second_moment() const;  // d x q grid of mean^2 + variance
  Vec nu_mean() const { return nu_a.cwiseQuotient(nu_b); }
  Mat B_mean() const;  // strictly lower, row j holds mu_beta_j
};

struct FitResult {
  ModelSpec spec;
  VariationalState state;
  Mat theta_hat;  // d x q posterior mean of Theta
  Mat a_hat;      // linearized mode only: posterior mean of A = L Theta
  Mat b_hat;
  Vec v_hat;      // posterior mean of nu
  Mat mu_omega;   // E_q[Omega]
  double e_log_det_omega = 0.0;
  Vec theta_mu;   // vec(Theta') and its covariance, as used by the predictive
  Mat theta_cov;
  int iterations = 0;
  bool converged = false;
  double wall_time_seconds = 0.0;
  Vec z_sq_norms;  // ||z_k||^2 over the estimation sample (for SAVS)
};

class CaviEngine {
 public:
  CaviEngine(const Design& design, const ModelSpec& spec);

  void update_nu(int j);
  void update_beta(int j);
  void update_theta();
  void update_latents();
  double compute_elbo() const;

  // one full sweep in the fixed order; appends to the ELBO trace and returns it
  double sweep(bool update_latents_too = true);

  const VariationalState& state() const { return st_; }
  // after editing the state by hand call refresh()
  VariationalState& mutable_state() { return st_; }
  void refresh();

  Mat mu_omega() const;
  Mat ktot() const;  // [tr(Cov(theta_i, theta_k) S)]_{ik}, S = sum z z'
  Mat prior_precision() const;  // d x q diagonal of the theta prior precision
  double expected_sq_error(int j) const;  // sum_t E[eps_{j,t}^2]
  bool linearized() const { return linearized_; }

 private:
  void init_state();
  void update_theta_joint();
  void update_theta_rows();
  void update_theta_linearized();
  void update_lasso();
  void update_ng();
  void update_hs();
  double elbo_prior() const;

  Design design_;
  ModelSpec spec_;
  bool linearized_;
  int d_, q_, T_;
  Mat S_;     // Z'Z
  Mat ZtY_;   // Z'Y
  Mat YtY_;
  VariationalState st_;
  // caches tied to the current theta block
  Mat RtR_;   // direct: R'R with R = Y - Z Theta'; linearized: E'E with E = Y - Z A'
  Mat YtE_;   // linearized: Y'E
  Mat K_;     // direct: ktot()
};

// normal-gamma eta: density proportional to exp{q (eta log eta - log Gamma(eta)) - eta S}, S > q.
// mean and log of the normalizing constant
struct EtaSummary {
  double mean;
  double log_c;
};
EtaSummary eta_summary(int q, double S);

FitResult fit(const Dataset& dataset, const ModelSpec& spec);
FitResult fit_design(const Design& design, const ModelSpec& spec);
FitResult fit_linearized(const Dataset& dataset, const ModelSpec& spec);

}  // namespace vbvar
