#include "vbvar/cavi.hpp"

#include "vbvar/special_functions.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace vbvar {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kM2Floor = 1e-12;

Eigen::LLT<Mat> spd_factor(const Mat& P, const char* what) {
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalFault(std::string(what) + ": system not SPD");
  return llt;
}

double llt_logdet(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Mat sym_inverse(const Eigen::LLT<Mat>& llt, Eigen::Index n) {
  Mat inv = llt.solve(Mat::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

double mean_log_gamma(double a, double b) { return digamma(a) - std::log(b); }

}  // namespace

EtaSummary eta_summary(int q, double S) {
  const double target = S / q - 1.0;
  if (!(target > 0) || !std::isfinite(target))
    throw NumericalFault("eta update: improper density (S=" + std::to_string(S) + ")");
  auto g = [q, S](double e) { return q * (e * std::log(e) - log_gamma(e)) - e * S; };
  // the mode solves log(eta) - digamma(eta) = S/q - 1; the left side decreases in eta
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double e = std::exp(mid);
    if (std::log(e) - digamma(e) > target) lo = mid; else hi = mid;
  }
  const double mode = std::exp(0.5 * (lo + hi));
  const double gmax = g(mode);
  double upper = 2.0 * mode + 1.0;
  while (g(upper) > gmax - 40.0) upper *= 2.0;
  auto f0 = [&](double e) { return std::exp(g(e) - gmax); };
  auto f1 = [&](double e) { return e * std::exp(g(e) - gmax); };
  const double tol = 1e-13;
  double i0 = integrate_1d(f0, 0.0, mode, tol) + integrate_1d(f0, mode, upper, tol);
  double i1 = integrate_1d(f1, 0.0, mode, tol) + integrate_1d(f1, mode, upper, tol);
  return {i1 / i0, gmax + std::log(i0)};
}

Mat VariationalState::theta_mean() const {
  Mat m(d, q);
  for (int j = 0; j < d; ++j) m.row(j) = theta_mu.segment(j * q, q).transpose();
  return m;
}

Mat VariationalState::cov_block(int i, int k) const {
  if (joint) return theta_cov.block(i * q, k * q, q, q);
  if (i == k) return theta_cov_rows[i];
  return Mat::Zero(q, q);
}

Mat VariationalState::theta_second_moment() const {
  Mat m2(d, q);
  for (int j = 0; j < d; ++j)
    for (int c = 0; c < q; ++c) {
      double var = joint ? theta_cov(j * q + c, j * q + c) : theta_cov_rows[j](c, c);
      double mu = theta_mu(j * q + c);
      m2(j, c) = mu * mu + var;
    }
  return m2;
}

Mat VariationalState::B_mean() const {
  Mat B = Mat::Zero(d, d);
  for (int j = 1; j < d; ++j) B.row(j).head(j) = beta_mu[j].transpose();
  return B;
}

CaviEngine::CaviEngine(const Design& design, const ModelSpec& spec)
    : design_(design), spec_(spec),
      linearized_(spec.parametrization == Parametrization::CholeskyLinearized) {
  spec_.validate();
  d_ = design_.d();
  q_ = design_.q();
  T_ = design_.T();
  if (T_ < 1) throw ValidationError("fit: empty design");
  if (!design_.Y.allFinite() || !design_.Z.allFinite()) throw ValidationError("fit: non-finite data");
  if (spec_.factorization == Factorization::Joint && d_ * q_ > spec_.max_joint_dim)
    throw ValidationError("joint factorization refused: d(d+p+1) = " + std::to_string(d_ * q_) +
                          " exceeds " + std::to_string(spec_.max_joint_dim) +
                          "; use the row factorization");
  S_ = design_.Z.transpose() * design_.Z;
  ZtY_ = design_.Z.transpose() * design_.Y;
  YtY_ = design_.Y.transpose() * design_.Y;
  init_state();
  refresh();
}

void CaviEngine::init_state() {
  const auto& h = spec_.hyper;
  st_ = VariationalState{};
  st_.d = d_;
  st_.q = q_;
  st_.T = T_;
  st_.joint = spec_.factorization == Factorization::Joint;

  st_.nu_a = Vec::Constant(d_, h.a_nu + 0.5 * T_);
  st_.nu_b.resize(d_);
  for (int j = 0; j < d_; ++j) {
    const auto& col = design_.Y.col(j);
    double var = T_ > 1 ? (col.array() - col.mean()).square().sum() / (T_ - 1) : 0.0;
    st_.nu_b(j) = h.b_nu * (1.0 + var);
  }
  st_.beta_mu.resize(d_);
  st_.beta_cov.resize(d_);
  for (int j = 0; j < d_; ++j) {
    st_.beta_mu[j] = Vec::Zero(j);
    st_.beta_cov[j] = h.tau * Mat::Identity(j, j);
  }

  // mean zero; covariance from one ridge pass at the initial nu
  const int n = d_ * q_;
  st_.theta_mu = Vec::Zero(n);
  st_.theta_logdet = 0.0;
  if (st_.joint) st_.theta_cov = Mat::Zero(n, n);
  else st_.theta_cov_rows.assign(d_, Mat());
  Vec nu0 = st_.nu_mean();
  for (int j = 0; j < d_; ++j) {
    Mat P = nu0(j) * S_;
    P.diagonal().array() += 1.0 / h.upsilon0;
    auto llt = spd_factor(P, "initial ridge pass");
    Mat cov = sym_inverse(llt, q_);
    st_.theta_logdet -= llt_logdet(llt);
    if (st_.joint) st_.theta_cov.block(j * q_, j * q_, q_, q_) = cov;
    else st_.theta_cov_rows[j] = cov;
  }

  auto& L = st_.latents;
  switch (spec_.prior) {
    case Prior::Normal: break;
    case Prior::AdaptiveLasso:
    case Prior::NormalGamma:
      L.gig_zeta = Mat::Constant(d_, q_, 0.5);
      L.gig_a = Mat::Constant(d_, q_, h.h1 / h.h2);
      L.gig_b = Mat::Constant(d_, q_, 1.0);
      L.ups_mean = Mat::Constant(d_, q_, h.upsilon0);
      L.ups_inv = Mat::Constant(d_, q_, 1.0 / h.upsilon0);
      L.ups_log = Mat::Constant(d_, q_, std::log(h.upsilon0));
      L.lam_a = Mat::Constant(d_, q_, h.h1);
      L.lam_b = Mat::Constant(d_, q_, h.h2);
      if (spec_.prior == Prior::NormalGamma) {
        L.eta_mean = Vec::Ones(d_);
        L.eta_logc = Vec::Zero(d_);
        L.eta_S = Vec::Zero(d_);
      }
      break;
    case Prior::Horseshoe:
      L.hs_ups2_b = Mat::Constant(d_, q_, h.upsilon0);
      L.hs_lam_b = Mat::Constant(d_, q_, 1.0);
      L.hs_gam2_a = 0.5 * (d_ * q_ + 1.0);
      L.hs_gam2_b = L.hs_gam2_a;
      L.hs_eta_b = 1.0;
      break;
  }
}

Mat CaviEngine::ktot() const {
  Mat K = Mat::Zero(d_, d_);
  if (st_.joint) {
    for (int i = 0; i < d_; ++i)
      for (int k = 0; k <= i; ++k) {
        double v = st_.theta_cov.block(i * q_, k * q_, q_, q_).cwiseProduct(S_).sum();
        K(i, k) = v;
        K(k, i) = v;
      }
  } else {
    for (int i = 0; i < d_; ++i) K(i, i) = st_.theta_cov_rows[i].cwiseProduct(S_).sum();
  }
  return K;
}

void CaviEngine::refresh() {
  Mat M = st_.theta_mean();
  Mat R = design_.Y - design_.Z * M.transpose();
  RtR_ = R.transpose() * R;
  if (linearized_) YtE_ = design_.Y.transpose() * R;
  K_ = ktot();
}

double CaviEngine::expected_sq_error(int j) const {
  double se = RtR_(j, j) + K_(j, j);
  if (j == 0) return se;
  const Vec& m = st_.beta_mu[j];
  const Mat& C = st_.beta_cov[j];
  if (linearized_) {
    auto Yll = YtY_.topLeftCorner(j, j);
    se += -2.0 * m.dot(YtE_.col(j).head(j)) + m.dot(Yll * m) + C.cwiseProduct(Yll).sum();
    return se;
  }
  auto Rll = RtR_.topLeftCorner(j, j);
  auto Kll = K_.topLeftCorner(j, j);
  se += -2.0 * m.dot(RtR_.col(j).head(j)) + m.dot(Rll * m);
  se += (C + m * m.transpose()).cwiseProduct(Kll).sum();
  se += C.cwiseProduct(Rll).sum();
  se -= 2.0 * K_.col(j).head(j).dot(m);
  return se;
}

void CaviEngine::update_nu(int j) {
  const auto& h = spec_.hyper;
  double se = expected_sq_error(j);
  double b = h.b_nu + 0.5 * se;
  if (!(b > 0) || !std::isfinite(b))
    throw NumericalFault("nu update: non-positive rate in equation " + std::to_string(j + 1));
  st_.nu_a(j) = h.a_nu + 0.5 * T_;
  st_.nu_b(j) = b;
}

void CaviEngine::update_beta(int j) {
  if (j < 1) return;
  const double nu = st_.nu_a(j) / st_.nu_b(j);
  Mat P;
  Vec rhs;
  if (linearized_) {
    P = nu * YtY_.topLeftCorner(j, j);
    rhs = nu * YtE_.col(j).head(j);
  } else {
    P = nu * (RtR_.topLeftCorner(j, j) + K_.topLeftCorner(j, j));
    rhs = nu * (RtR_.col(j).head(j) + K_.col(j).head(j));
  }
  P.diagonal().array() += 1.0 / spec_.hyper.tau;
  auto llt = spd_factor(P, "beta update");
  st_.beta_cov[j] = sym_inverse(llt, j);
  st_.beta_mu[j] = llt.solve(rhs);
}

Mat CaviEngine::mu_omega() const {
  Vec nu = st_.nu_mean();
  Mat L = Mat::Identity(d_, d_) - st_.B_mean();
  Mat Om = L.transpose() * nu.asDiagonal() * L;
  for (int k = 1; k < d_; ++k) Om.topLeftCorner(k, k) += nu(k) * st_.beta_cov[k];
  return 0.5 * (Om + Om.transpose());
}

Mat CaviEngine::prior_precision() const {
  const auto& L = st_.latents;
  switch (spec_.prior) {
    case Prior::Normal: return Mat::Constant(d_, q_, 1.0 / spec_.hyper.upsilon0);
    case Prior::AdaptiveLasso:
    case Prior::NormalGamma: return L.ups_inv;
    case Prior::Horseshoe:
      return (L.hs_gam2_a / L.hs_gam2_b) * L.hs_ups2_b.cwiseInverse();
  }
  return Mat();
}

void CaviEngine::update_theta() {
  if (linearized_) update_theta_linearized();
  else if (st_.joint) update_theta_joint();
  else update_theta_rows();
  refresh();
}

void CaviEngine::update_theta_joint() {
  const int n = d_ * q_;
  Mat Om = mu_omega();
  Mat D = prior_precision();
  Mat P(n, n);
  for (int i = 0; i < d_; ++i)
    for (int k = 0; k < d_; ++k) P.block(i * q_, k * q_, q_, q_) = Om(i, k) * S_;
  for (int j = 0; j < d_; ++j) P.diagonal().segment(j * q_, q_) += D.row(j).transpose();
  Mat rhsM = ZtY_ * Om;
  Vec rhs(n);
  for (int j = 0; j < d_; ++j) rhs.segment(j * q_, q_) = rhsM.col(j);
  auto llt = spd_factor(P, "joint theta update");
  st_.theta_mu = llt.solve(rhs);
  st_.theta_cov = sym_inverse(llt, n);
  st_.theta_logdet = -llt_logdet(llt);
}

void CaviEngine::update_theta_rows() {
  Mat Om = mu_omega();
  Mat D = prior_precision();
  double logdet = 0.0;
  for (int j = 0; j < d_; ++j) {
    Mat P = Om(j, j) * S_;
    P.diagonal() += D.row(j).transpose();
    Vec rhs = ZtY_ * Om.col(j);
    for (int i = 0; i < d_; ++i)
      if (i != j) rhs -= Om(j, i) * (S_ * st_.theta_mu.segment(i * q_, q_));
    auto llt = spd_factor(P, "row theta update");
    st_.theta_mu.segment(j * q_, q_) = llt.solve(rhs);
    st_.theta_cov_rows[j] = sym_inverse(llt, q_);
    logdet -= llt_logdet(llt);
  }
  st_.theta_logdet = logdet;
}

// priors sit on A = L Theta; given beta the equations decouple
void CaviEngine::update_theta_linearized() {
  Mat D = prior_precision();
  double logdet = 0.0;
  for (int j = 0; j < d_; ++j) {
    const double nu = st_.nu_a(j) / st_.nu_b(j);
    Mat P = nu * S_;
    P.diagonal() += D.row(j).transpose();
    Vec rhs = ZtY_.col(j);
    if (j > 0) rhs -= ZtY_.leftCols(j) * st_.beta_mu[j];
    rhs *= nu;
    auto llt = spd_factor(P, "linearized row update");
    st_.theta_mu.segment(j * q_, q_) = llt.solve(rhs);
    Mat cov = sym_inverse(llt, q_);
    logdet -= llt_logdet(llt);
    if (st_.joint) {
      st_.theta_cov.block(j * q_, 0, q_, d_ * q_).setZero();
      st_.theta_cov.block(0, j * q_, d_ * q_, q_).setZero();
      st_.theta_cov.block(j * q_, j * q_, q_, q_) = cov;
    } else {
      st_.theta_cov_rows[j] = cov;
    }
  }
  st_.theta_logdet = logdet;
}

void CaviEngine::update_latents() {
  switch (spec_.prior) {
    case Prior::Normal: break;
    case Prior::AdaptiveLasso: update_lasso(); break;
    case Prior::NormalGamma: update_ng(); break;
    case Prior::Horseshoe: update_hs(); break;
  }
}

void CaviEngine::update_lasso() {
  const auto& h = spec_.hyper;
  auto& L = st_.latents;
  Mat m2 = st_.theta_second_moment();
  for (int j = 0; j < d_; ++j)
    for (int c = 0; c < q_; ++c) {
      // q(1/upsilon) inverse Gaussian with a = E[theta^2], b = E[lambda^2]
      double a = std::max(m2(j, c), kM2Floor);
      double b = L.lam_a(j, c) / L.lam_b(j, c);
      L.gig_zeta(j, c) = 0.5;
      L.gig_a(j, c) = b;
      L.gig_b(j, c) = a;
      L.ups_inv(j, c) = std::sqrt(b / a);
      L.ups_mean(j, c) = std::sqrt(a / b) + 1.0 / b;
      L.lam_a(j, c) = h.h1 + 1.0;
      L.lam_b(j, c) = 0.5 * L.ups_mean(j, c) + h.h2;
    }
}

void CaviEngine::update_ng() {
  const auto& h = spec_.hyper;
  auto& L = st_.latents;
  Mat m2 = st_.theta_second_moment();
  for (int j = 0; j < d_; ++j) {
    const double eta = L.eta_mean(j);
    for (int c = 0; c < q_; ++c) {
      const double lam = L.lam_a(j, c) / L.lam_b(j, c);
      GIGParams g{eta - 0.5, eta * lam, std::max(m2(j, c), kM2Floor)};
      GIGMoments mo = gig_moments(g);
      L.gig_zeta(j, c) = g.zeta;
      L.gig_a(j, c) = g.a;
      L.gig_b(j, c) = g.b;
      L.ups_mean(j, c) = mo.mean;
      L.ups_inv(j, c) = mo.mean_inverse;
      L.ups_log(j, c) = mo.mean_log;
    }
    double S = h.h3;
    for (int c = 0; c < q_; ++c) {
      L.lam_a(j, c) = eta + h.h1;
      L.lam_b(j, c) = 0.5 * eta * L.ups_mean(j, c) + h.h2;
      const double lam = L.lam_a(j, c) / L.lam_b(j, c);
      const double loglam = mean_log_gamma(L.lam_a(j, c), L.lam_b(j, c));
      S += 0.5 * lam * L.ups_mean(j, c) - loglam - L.ups_log(j, c) + std::log(2.0);
    }
    EtaSummary es = eta_summary(q_, S);
    L.eta_S(j) = S;
    L.eta_mean(j) = es.mean;
    L.eta_logc(j) = es.log_c;
  }
}

void CaviEngine::update_hs() {
  auto& L = st_.latents;
  Mat m2 = st_.theta_second_moment();
  const double inv_gam2 = L.hs_gam2_a / L.hs_gam2_b;
  for (int j = 0; j < d_; ++j)
    for (int c = 0; c < q_; ++c)
      L.hs_ups2_b(j, c) = 1.0 / L.hs_lam_b(j, c) + 0.5 * m2(j, c) * inv_gam2;
  L.hs_lam_b = (1.0 + L.hs_ups2_b.cwiseInverse().array()).matrix();
  L.hs_gam2_a = 0.5 * (d_ * q_ + 1.0);
  L.hs_gam2_b = 1.0 / L.hs_eta_b + 0.5 * L.hs_ups2_b.cwiseInverse().cwiseProduct(m2).sum();
  L.hs_eta_b = 1.0 + L.hs_gam2_a / L.hs_gam2_b;
}

double CaviEngine::elbo_prior() const {
  const auto& h = spec_.hyper;
  const auto& L = st_.latents;
  Mat m2 = st_.theta_second_moment();
  const double log2 = std::log(2.0);
  double e = 0.0;
  switch (spec_.prior) {
    case Prior::Normal:
      e = -0.5 * d_ * q_ * (kLog2Pi + std::log(h.upsilon0)) - 0.5 * m2.sum() / h.upsilon0;
      break;
    case Prior::AdaptiveLasso: {
      // E[log upsilon] enters with coefficient -1/2 from the theta prior and
      // +1/2 from the GIG(1/2) entropy, so it drops out
      const double lg_h1 = log_gamma(h.h1);
      for (int j = 0; j < d_; ++j)
        for (int c = 0; c < q_; ++c) {
          const double la = L.lam_a(j, c), lb = L.lam_b(j, c);
          const double lam2 = la / lb, loglam2 = mean_log_gamma(la, lb);
          const GIGParams g{L.gig_zeta(j, c), L.gig_a(j, c), L.gig_b(j, c)};
          e += -0.5 * kLog2Pi - 0.5 * L.ups_inv(j, c) * m2(j, c);
          e += loglam2 - log2 - 0.5 * lam2 * L.ups_mean(j, c);
          e += h.h1 * std::log(h.h2) - lg_h1 + (h.h1 - 1.0) * loglam2 - h.h2 * lam2;
          e += -gig_log_normalizer(g) + 0.5 * (g.a * L.ups_mean(j, c) + g.b * L.ups_inv(j, c));
          e += gamma_entropy(la, lb);
        }
      break;
    }
    case Prior::NormalGamma: {
      // the q * E[eta log eta - log Gamma(eta)] terms of log p(upsilon|.) and log q(eta) cancel
      const double lg_h1 = log_gamma(h.h1);
      for (int j = 0; j < d_; ++j) {
        const double eta = L.eta_mean(j);
        for (int c = 0; c < q_; ++c) {
          const double la = L.lam_a(j, c), lb = L.lam_b(j, c);
          const double lam = la / lb, loglam = mean_log_gamma(la, lb);
          const GIGParams g{L.gig_zeta(j, c), L.gig_a(j, c), L.gig_b(j, c)};
          const double ul = L.ups_log(j, c), um = L.ups_mean(j, c), ui = L.ups_inv(j, c);
          e += -0.5 * kLog2Pi - 0.5 * ul - 0.5 * ui * m2(j, c);
          e += eta * (loglam - log2) + (eta - 1.0) * ul - 0.5 * eta * lam * um;
          e += h.h1 * std::log(h.h2) - lg_h1 + (h.h1 - 1.0) * loglam - h.h2 * lam;
          e += -gig_log_normalizer(g) - (g.zeta - 1.0) * ul + 0.5 * (g.a * um + g.b * ui);
          e += gamma_entropy(la, lb);
        }
        e += std::log(h.h3) - h.h3 * eta;
        e += eta * L.eta_S(j) + L.eta_logc(j);
      }
      break;
    }
    case Prior::Horseshoe: {
      const double lg_half = log_gamma(0.5);
      const double ent1 = inverse_gamma_entropy(1.0, 1.0);  // shape-1 entropy minus log(scale)
      const auto g2 = inverse_gamma_moments(L.hs_gam2_a, L.hs_gam2_b);
      const auto et = inverse_gamma_moments(1.0, L.hs_eta_b);
      for (int j = 0; j < d_; ++j)
        for (int c = 0; c < q_; ++c) {
          const auto u = inverse_gamma_moments(1.0, L.hs_ups2_b(j, c));
          const auto l = inverse_gamma_moments(1.0, L.hs_lam_b(j, c));
          e += -0.5 * kLog2Pi - 0.5 * (u.mean_log + g2.mean_log) -
               0.5 * m2(j, c) * u.mean_inverse * g2.mean_inverse;
          e += -0.5 * l.mean_log - lg_half - 1.5 * u.mean_log - l.mean_inverse * u.mean_inverse;
          e += -lg_half - 1.5 * l.mean_log - l.mean_inverse;
          e += ent1 + std::log(L.hs_ups2_b(j, c));
          e += ent1 + std::log(L.hs_lam_b(j, c));
        }
      e += -0.5 * et.mean_log - lg_half - 1.5 * g2.mean_log - et.mean_inverse * g2.mean_inverse;
      e += -lg_half - 1.5 * et.mean_log - et.mean_inverse;
      e += inverse_gamma_entropy(L.hs_gam2_a, L.hs_gam2_b);
      e += ent1 + std::log(L.hs_eta_b);
      break;
    }
  }
  return e;
}

double CaviEngine::compute_elbo() const {
  const auto& h = spec_.hyper;
  double e = 0.0;
  const double lg_anu = log_gamma(h.a_nu);
  for (int j = 0; j < d_; ++j) {
    const double a = st_.nu_a(j), b = st_.nu_b(j);
    const double nu = a / b, lognu = mean_log_gamma(a, b);
    e += 0.5 * T_ * (lognu - kLog2Pi) - 0.5 * nu * expected_sq_error(j);
    e += h.a_nu * std::log(h.b_nu) - lg_anu + (h.a_nu - 1.0) * lognu - h.b_nu * nu;
    e += gamma_entropy(a, b);
    if (j > 0) {
      const Mat& C = st_.beta_cov[j];
      auto llt = spd_factor(C, "beta covariance");
      e += 0.5 * llt_logdet(llt) + 0.5 * j - 0.5 * j * std::log(h.tau) -
           0.5 * (C.trace() + st_.beta_mu[j].squaredNorm()) / h.tau;
    }
  }
  e += 0.5 * st_.theta_logdet + 0.5 * d_ * q_ * (1.0 + kLog2Pi);
  e += elbo_prior();
  if (!std::isfinite(e)) throw NumericalFault("ELBO is not finite");
  return e;
}

double CaviEngine::sweep(bool update_latents_too) {
  update_nu(0);
  for (int j = 1; j < d_; ++j) {
    update_nu(j);
    update_beta(j);
  }
  update_theta();
  if (update_latents_too) update_latents();
  double e = compute_elbo();
  st_.elbo_trace.push_back(e);
  return e;
}

FitResult fit_design(const Design& design, const ModelSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  CaviEngine eng(design, spec);
  const auto& conv = spec.convergence;
  FitResult out;
  out.spec = spec;
  Vec prev = eng.state().theta_mu;
  double prev_elbo = 0.0;
  for (int it = 1; it <= conv.max_iter; ++it) {
    double e = eng.sweep();
    double dpar = (eng.state().theta_mu - prev).cwiseAbs().maxCoeff();
    prev = eng.state().theta_mu;
    out.iterations = it;
    if (it > 1 && std::fabs(e - prev_elbo) < conv.tol_elbo * std::fabs(prev_elbo) &&
        dpar < conv.tol_param) {
      out.converged = true;
      break;
    }
    prev_elbo = e;
  }

  const auto& st = eng.state();
  const int d = st.d, q = st.q;
  out.state = st;
  out.b_hat = st.B_mean();
  out.v_hat = st.nu_mean();
  out.mu_omega = eng.mu_omega();
  out.e_log_det_omega = 0.0;
  for (int j = 0; j < d; ++j) out.e_log_det_omega += mean_log_gamma(st.nu_a(j), st.nu_b(j));
  out.z_sq_norms = design.Z.colwise().squaredNorm().transpose();

  Mat cov(d * q, d * q);
  if (st.joint) {
    cov = st.theta_cov;
  } else {
    cov.setZero();
    for (int j = 0; j < d; ++j) cov.block(j * q, j * q, q, q) = st.theta_cov_rows[j];
  }
  if (eng.linearized()) {
    // Theta = L^{-1} A; L uncertainty is not propagated into the Theta covariance
    out.a_hat = st.theta_mean();
    Mat L = Mat::Identity(d, d) - out.b_hat;
    Mat Linv = L.triangularView<Eigen::UnitLower>().solve(Mat::Identity(d, d));
    out.theta_hat = Linv * out.a_hat;
    Mat M = Mat::Zero(d * q, d * q);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k <= i; ++k)
        M.block(i * q, k * q, q, q) = Linv(i, k) * Mat::Identity(q, q);
    out.theta_mu.resize(d * q);
    for (int j = 0; j < d; ++j) out.theta_mu.segment(j * q, q) = out.theta_hat.row(j).transpose();
    out.theta_cov = M * cov * M.transpose();
    out.theta_cov = 0.5 * (out.theta_cov + out.theta_cov.transpose());
  } else {
    out.theta_hat = st.theta_mean();
    out.theta_mu = st.theta_mu;
    out.theta_cov = cov;
  }
  out.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

FitResult fit(const Dataset& dataset, const ModelSpec& spec) {
  return fit_design(build_design(dataset), spec);
}

FitResult fit_linearized(const Dataset& dataset, const ModelSpec& spec) {
  if (spec.parametrization != Parametrization::CholeskyLinearized)
    throw ValidationError("fit_linearized: spec must use the linearized parametrization");
  return fit_design(build_design(dataset), spec);
}

}  // namespace vbvar
