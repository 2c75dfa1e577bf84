#include "vbvar/predict.hpp"

#include "vbvar/special_functions.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace vbvar {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Mat lower_chol(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalFault(std::string(what) + ": not SPD");
  return llt.matrixL();
}

Mat theta_from_vec(const Vec& v, int d, int q) {
  Mat m(d, q);
  for (int j = 0; j < d; ++j) m.row(j) = v.segment(j * q, q).transpose();
  return m;
}

// loc/cov moments of a mixture whose components share within-covariance `within`
void mixture_moments(PredictiveDensity& pd, const Mat& within) {
  const double n = static_cast<double>(pd.locs.rows());
  pd.mean = pd.locs.colwise().mean().transpose();
  Mat c = pd.locs.rowwise() - pd.mean.transpose();
  pd.cov = within + c.transpose() * c / n;
  pd.cov = 0.5 * (pd.cov + pd.cov.transpose());
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -INFINITY;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double mvn_log_density(const Vec& y, const Vec& mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalFault("normal density: covariance not SPD");
  Vec r = llt.matrixL().solve(y - mean);
  double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (y.size() * kLog2Pi + logdet + r.squaredNorm());
}

double mvt_log_density(const Vec& y, const Vec& loc, const Mat& scale, double v) {
  const double d = static_cast<double>(y.size());
  Eigen::LLT<Mat> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalFault("Student-t density: scale not SPD");
  Vec r = llt.matrixL().solve(y - loc);
  double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return log_gamma(0.5 * (v + d)) - log_gamma(0.5 * v) - 0.5 * d * std::log(v * M_PI) -
         0.5 * logdet - 0.5 * (v + d) * std::log1p(r.squaredNorm() / v);
}

PredictiveDensity predict_mc_xi(const FitResult& fit, const Vec& z, int n, CounterRng& rng) {
  if (n < 1) throw ValidationError("predict: draws must be >= 1");
  const auto& st = fit.state;
  const int d = st.d, q = st.q;
  if (z.size() != q) throw ValidationError("predict: regressor has wrong length");
  Mat chol_theta = cov_factor(fit.theta_cov);
  std::vector<Mat> chol_beta(d);
  for (int j = 1; j < d; ++j) chol_beta[j] = lower_chol(st.beta_cov[j], "beta covariance");

  PredictiveDensity pd;
  pd.kind = PredictiveKind::McXi;
  pd.locs.resize(n, d);
  pd.draws.resize(n, d);
  pd.precisions.reserve(n);
  Mat within = Mat::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    Mat theta = theta_from_vec(mvn_draw(rng, fit.theta_mu, chol_theta), d, q);
    Mat L = Mat::Identity(d, d);
    Vec v(d);
    for (int j = 0; j < d; ++j) {
      v(j) = rng.gamma(st.nu_a(j), st.nu_b(j));
      if (j > 0) L.row(j).head(j) = -mvn_draw(rng, st.beta_mu[j], chol_beta[j]).transpose();
    }
    Mat omega = L.transpose() * v.asDiagonal() * L;
    Vec m = theta * z;
    // y = m + L^{-1} V^{-1/2} e has covariance Omega^{-1}
    Vec e(d);
    for (int j = 0; j < d; ++j) e(j) = rng.normal() / std::sqrt(v(j));
    Vec y = m + L.triangularView<Eigen::UnitLower>().solve(e);
    pd.locs.row(i) = m.transpose();
    pd.draws.row(i) = y.transpose();
    Mat Linv = L.triangularView<Eigen::UnitLower>().solve(Mat::Identity(d, d));
    within += Linv * v.cwiseInverse().asDiagonal() * Linv.transpose();
    pd.precisions.push_back(omega);
  }
  mixture_moments(pd, within / n);
  return pd;
}

PredictiveDensity predict_mc_theta(const FitResult& fit, const WishartApprox& w, const Vec& z,
                                   int n, CounterRng& rng) {
  if (n < 1) throw ValidationError("predict: draws must be >= 1");
  const int d = fit.state.d, q = fit.state.q;
  if (z.size() != q) throw ValidationError("predict: regressor has wrong length");
  const double v = w.delta_hat - d + 1.0;
  if (!(v > 0)) throw ValidationError("predict: Student-t degrees of freedom v <= 0");
  PredictiveDensity pd;
  pd.kind = PredictiveKind::McTheta;
  pd.v = v;
  pd.S = (v * w.H_hat).inverse();
  pd.S = 0.5 * (pd.S + pd.S.transpose());
  Mat chol_theta = cov_factor(fit.theta_cov);
  Mat chol_S = lower_chol(pd.S, "Student-t scale");
  pd.locs.resize(n, d);
  pd.draws.resize(n, d);
  for (int i = 0; i < n; ++i) {
    Mat theta = theta_from_vec(mvn_draw(rng, fit.theta_mu, chol_theta), d, q);
    Vec m = theta * z;
    double chi = rng.gamma(0.5 * v, 0.5);
    Vec y = mvn_draw(rng, Vec::Zero(d), chol_S) / std::sqrt(chi / v) + m;
    pd.locs.row(i) = m.transpose();
    pd.draws.row(i) = y.transpose();
  }
  Mat within = v > 2 ? Mat(v / (v - 2.0) * pd.S) : Mat(Mat::Constant(d, d, INFINITY));
  mixture_moments(pd, within);
  return pd;
}

PredictiveDensity predict_gaussian(const FitResult& fit, const WishartApprox& w, const Vec& z) {
  const int d = fit.state.d, q = fit.state.q;
  if (z.size() != q) throw ValidationError("predict: regressor has wrong length");
  const double v = w.delta_hat - d + 1.0;
  if (!(v > 2)) throw ValidationError("predict: Gaussian approximation needs v > 2");
  Mat S = (v * w.H_hat).inverse();
  Mat R = (v - 2.0) / v * S.inverse();
  R = 0.5 * (R + R.transpose());
  // Z_t = I_d kron z'
  Mat Zt = Mat::Zero(d, d * q);
  for (int j = 0; j < d; ++j) Zt.block(j, j * q, 1, q) = z.transpose();
  Eigen::LDLT<Mat> sig(fit.theta_cov);
  if (sig.info() != Eigen::Success) throw NumericalFault("predict: theta covariance factorization failed");
  Mat sig_inv = sig.solve(Mat::Identity(d * q, d * q));
  sig_inv = 0.5 * (sig_inv + sig_inv.transpose());
  Mat tilde = (sig_inv + Zt.transpose() * R * Zt).inverse();
  tilde = 0.5 * (tilde + tilde.transpose());
  Mat prec = R - R * Zt * tilde * Zt.transpose() * R;
  prec = 0.5 * (prec + prec.transpose());
  PredictiveDensity pd;
  pd.kind = PredictiveKind::Gaussian;
  pd.v = v;
  pd.S = S;
  pd.cov = prec.inverse();
  pd.cov = 0.5 * (pd.cov + pd.cov.transpose());
  pd.mean = pd.cov * R * Zt * tilde * sig.solve(fit.theta_mu);
  return pd;
}

PredictiveDensity predict(const FitResult& fit, const WishartApprox& w, const Vec& z,
                          CounterRng& rng) {
  switch (fit.spec.predictive) {
    case PredictiveKind::McXi: return predict_mc_xi(fit, z, fit.spec.n_draws, rng);
    case PredictiveKind::McTheta: return predict_mc_theta(fit, w, z, fit.spec.n_draws, rng);
    case PredictiveKind::Gaussian: return predict_gaussian(fit, w, z);
  }
  throw ValidationError("predict: unknown strategy");
}

double log_density(const PredictiveDensity& pd, const Vec& y) {
  switch (pd.kind) {
    case PredictiveKind::Gaussian: return mvn_log_density(y, pd.mean, pd.cov);
    case PredictiveKind::McXi: {
      std::vector<double> lp(pd.locs.rows());
      for (Eigen::Index i = 0; i < pd.locs.rows(); ++i)
        lp[i] = mvn_log_density(y, pd.locs.row(i).transpose(), pd.precisions[i].inverse());
      return log_sum_exp(lp) - std::log(static_cast<double>(lp.size()));
    }
    case PredictiveKind::McTheta: {
      std::vector<double> lp(pd.locs.rows());
      for (Eigen::Index i = 0; i < pd.locs.rows(); ++i)
        lp[i] = mvt_log_density(y, pd.locs.row(i).transpose(), pd.S, pd.v);
      return log_sum_exp(lp) - std::log(static_cast<double>(lp.size()));
    }
  }
  return NAN;
}

double log_predictive_score(const PredictiveDensity& pd, const Vec& y) {
  double s = log_density(pd, y);
  if (!std::isfinite(s)) throw NumericalFault("log predictive score is not finite");
  return s;
}

double marginal_tail_mass(const PredictiveDensity& pd, int i, double center, double half_width) {
  auto two_sided = [&](auto dist, double loc, double scale) {
    double lo = (center - half_width - loc) / scale, hi = (center + half_width - loc) / scale;
    return boost::math::cdf(dist, lo) + boost::math::cdf(boost::math::complement(dist, hi));
  };
  switch (pd.kind) {
    case PredictiveKind::Gaussian:
      return two_sided(boost::math::normal_distribution<double>(), pd.mean(i), std::sqrt(pd.cov(i, i)));
    case PredictiveKind::McXi: {
      double s = 0.0;
      for (Eigen::Index k = 0; k < pd.locs.rows(); ++k) {
        double var = pd.precisions[k].inverse()(i, i);
        s += two_sided(boost::math::normal_distribution<double>(), pd.locs(k, i), std::sqrt(var));
      }
      return s / pd.locs.rows();
    }
    case PredictiveKind::McTheta: {
      boost::math::students_t_distribution<double> t(pd.v);
      double s = 0.0;
      for (Eigen::Index k = 0; k < pd.locs.rows(); ++k)
        s += two_sided(t, pd.locs(k, i), std::sqrt(pd.S(i, i)));
      return s / pd.locs.rows();
    }
  }
  return NAN;
}

}  // namespace vbvar
