#include "vbvar/posterior.hpp"

#include "vbvar/special_functions.hpp"

#include <spdlog/spdlog.h>

#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <cmath>

namespace vbvar {

namespace {

constexpr int kBins = 512;
constexpr double kDeltaMax = 1e6;

}  // namespace

SparsePattern savs_from_norms(const Mat& theta_hat, const Vec& z_sq_norms) {
  if (theta_hat.cols() != z_sq_norms.size()) throw ValidationError("savs: dimension mismatch");
  SparsePattern sp;
  sp.mask.resize(theta_hat.rows(), theta_hat.cols());
  sp.theta_sparse = theta_hat;
  for (Eigen::Index j = 0; j < theta_hat.rows(); ++j)
    for (Eigen::Index k = 0; k < theta_hat.cols(); ++k) {
      double a = std::fabs(theta_hat(j, k));
      bool keep = a * a * a * z_sq_norms(k) > 1.0;
      sp.mask(j, k) = keep;
      if (!keep) sp.theta_sparse(j, k) = 0.0;
    }
  return sp;
}

SparsePattern savs(const Mat& theta_hat, const Mat& Z) {
  if (theta_hat.cols() != Z.cols()) throw ValidationError("savs: dimension mismatch");
  return savs_from_norms(theta_hat, Z.colwise().squaredNorm().transpose());
}

double wishart_objective(double delta, const Mat& e_omega, double e_log_det) {
  const int d = static_cast<int>(e_omega.rows());
  Eigen::LLT<Mat> llt(e_omega);
  if (llt.info() != Eigen::Success) throw NumericalFault("wishart fit: E[Omega] not SPD");
  const double logdet_e = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  // tr(H^{-1} E) = delta d when H = E / delta
  return 0.5 * d * delta * std::log(2.0) + 0.5 * delta * (logdet_e - d * std::log(delta)) +
         log_multivariate_gamma(d, 0.5 * delta) - 0.5 * delta * e_log_det + 0.5 * delta * d;
}

WishartApprox fit_wishart(const Mat& e_omega, double e_log_det) {
  const int d = static_cast<int>(e_omega.rows());
  WishartApprox w;
  w.e_omega = e_omega;
  w.e_log_det = e_log_det;
  const double lo = d - 1 + 1e-6;
  auto f = [&](double delta) { return wishart_objective(delta, e_omega, e_log_det); };
  w.delta_hat = minimize_1d(f, lo, kDeltaMax, 1e-10);
  w.H_hat = e_omega / w.delta_hat;
  w.at_boundary = w.delta_hat > kDeltaMax * (1.0 - 1e-6);
  if (w.at_boundary)
    spdlog::warn("wishart fit: degrees of freedom at the search bound (posterior nearly degenerate)");
  return w;
}

WishartApprox fit_wishart(const FitResult& fit) {
  return fit_wishart(fit.mu_omega, fit.e_log_det_omega);
}

namespace {

// histogram p (counts over n draws, kBins bins from lo of width w) vs a density
double histogram_accuracy(const std::vector<double>& p, double n, double lo, double w,
                          const Fn1& q_density) {
  double l1 = 0.0, qmass = 0.0;
  for (int b = 0; b < kBins; ++b) {
    double a = lo + b * w;
    // Simpson on the bin
    double qb = w / 6.0 * (q_density(a) + 4.0 * q_density(a + 0.5 * w) + q_density(a + w));
    qmass += qb;
    l1 += std::fabs(qb - p[b] / n);
  }
  l1 += std::max(0.0, 1.0 - qmass);  // q mass outside the sampled range
  return std::clamp(100.0 * (1.0 - 0.5 * l1), 0.0, 100.0);
}

}  // namespace

double approx_accuracy(const std::vector<double>& samples_p, const Fn1& q_density) {
  if (samples_p.size() < 1000) throw ValidationError("approx_accuracy: need at least 1000 samples");
  auto [mn, mx] = std::minmax_element(samples_p.begin(), samples_p.end());
  const double lo = *mn, hi = *mx;
  if (!(hi > lo)) throw ValidationError("approx_accuracy: degenerate sample");
  const double w = (hi - lo) / kBins;
  std::vector<double> p(kBins, 0.0);
  for (double s : samples_p) p[std::min(kBins - 1, static_cast<int>((s - lo) / w))] += 1.0;
  return histogram_accuracy(p, static_cast<double>(samples_p.size()), lo, w, q_density);
}

double approx_accuracy(const std::vector<double>& samples_p, const std::vector<double>& samples_q) {
  if (samples_p.size() < 1000 || samples_q.size() < 1000)
    throw ValidationError("approx_accuracy: need at least 1000 samples");
  auto [pm, pM] = std::minmax_element(samples_p.begin(), samples_p.end());
  auto [qm, qM] = std::minmax_element(samples_q.begin(), samples_q.end());
  const double lo = std::min(*pm, *qm), hi = std::max(*pM, *qM);
  if (!(hi > lo)) return 100.0;
  const double w = (hi - lo) / kBins;
  std::vector<double> p(kBins, 0.0), q(kBins, 0.0);
  for (double s : samples_p) p[std::min(kBins - 1, static_cast<int>((s - lo) / w))] += 1.0;
  for (double s : samples_q) q[std::min(kBins - 1, static_cast<int>((s - lo) / w))] += 1.0;
  double l1 = 0.0;
  for (int b = 0; b < kBins; ++b)
    l1 += std::fabs(p[b] / samples_p.size() - q[b] / samples_q.size());
  return std::clamp(100.0 * (1.0 - 0.5 * l1), 0.0, 100.0);
}

std::vector<Mat> sample_omega_q(const FitResult& fit, int n, CounterRng& rng) {
  const auto& st = fit.state;
  const int d = st.d;
  std::vector<Mat> chol(d);
  for (int j = 1; j < d; ++j) {
    Eigen::LLT<Mat> llt(st.beta_cov[j]);
    chol[j] = llt.matrixL();
  }
  std::vector<Mat> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Mat L = Mat::Identity(d, d);
    Vec v(d);
    for (int j = 0; j < d; ++j) {
      v(j) = rng.gamma(st.nu_a(j), st.nu_b(j));
      if (j > 0) L.row(j).head(j) = -mvn_draw(rng, st.beta_mu[j], chol[j]).transpose();
    }
    out.push_back(L.transpose() * v.asDiagonal() * L);
  }
  return out;
}

std::vector<Mat> sample_wishart(double delta, const Mat& H, int n, CounterRng& rng) {
  const int d = static_cast<int>(H.rows());
  if (!(delta > d - 1)) throw ValidationError("sample_wishart: delta <= d - 1");
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) throw NumericalFault("sample_wishart: scale not SPD");
  Mat LH = llt.matrixL();
  std::vector<Mat> out;
  out.reserve(n);
  for (int s = 0; s < n; ++s) {
    // Bartlett decomposition
    Mat A = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      A(i, i) = std::sqrt(rng.gamma(0.5 * (delta - i), 0.5));
      for (int k = 0; k < i; ++k) A(i, k) = rng.normal();
    }
    Mat LA = LH * A;
    out.push_back(LA * LA.transpose());
  }
  return out;
}

double wishart_diag_density(double delta, double h_ii, double w) {
  if (w <= 0) return 0.0;
  boost::math::gamma_distribution<double> g(0.5 * delta, 2.0 * h_ii);
  return boost::math::pdf(g, w);
}

double wishart_offdiag_density(double delta, double h_ii, double h_jj, double h_ij, double w) {
  // variance-gamma: lambda = delta/2, alpha = sqrt(h_ii h_jj)/D, beta = h_ij/D, gamma^2 = 1/D
  const double D = h_ii * h_jj - h_ij * h_ij;
  if (!(D > 0)) throw ValidationError("wishart_offdiag_density: 2x2 scale block not SPD");
  const double lam = 0.5 * delta, nu = lam - 0.5;
  const double alpha = std::sqrt(h_ii * h_jj) / D, beta = h_ij / D;
  const double c = -lam * std::log(D) - 0.5 * std::log(M_PI) - log_gamma(lam) - nu * std::log(2.0 * alpha);
  const double ax = std::fabs(w);
  double lk;  // log(|w|^nu K_nu(alpha |w|))
  if (ax == 0.0) {
    if (!(nu > 0)) return INFINITY;
    lk = log_gamma(nu) + (nu - 1.0) * std::log(2.0) - nu * std::log(alpha);
  } else {
    lk = nu * std::log(ax) + log_bessel_k(nu, alpha * ax);
  }
  return std::exp(c + lk + beta * w);
}

Mat omega_accuracy(const FitResult& fit, const WishartApprox& w, int n, std::uint64_t seed) {
  if (n < 1000) throw ValidationError("omega_accuracy: need at least 1000 samples");
  const int d = fit.state.d;
  const double delta = w.delta_hat;
  const Mat& H = w.H_hat;
  // two passes over the same counter stream (range, then histogram) keep memory O(d^2 bins)
  constexpr int kBatch = 20000;
  auto stream = [&](auto&& visit) {
    CounterRng rp(seed, 1);
    for (int done = 0; done < n; done += kBatch)
      for (const Mat& om : sample_omega_q(fit, std::min(kBatch, n - done), rp)) visit(om);
  };
  Mat lo = Mat::Constant(d, d, INFINITY), hi = Mat::Constant(d, d, -INFINITY);
  stream([&](const Mat& om) {
    lo = lo.cwiseMin(om);
    hi = hi.cwiseMax(om);
  });
  Mat bw = (hi - lo) / kBins;
  std::vector<std::vector<double>> counts(d * d, std::vector<double>(kBins, 0.0));
  stream([&](const Mat& om) {
    for (int i = 0; i < d; ++i)
      for (int k = 0; k <= i; ++k) {
        int b = std::min(kBins - 1, static_cast<int>((om(i, k) - lo(i, k)) / bw(i, k)));
        counts[i * d + k][b] += 1.0;
      }
  });
  Mat acc(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k <= i; ++k) {
      if (!(hi(i, k) > lo(i, k))) throw ValidationError("omega_accuracy: degenerate sample");
      const auto& p = counts[i * d + k];
      double v;
      if (i == k)
        v = histogram_accuracy(p, n, lo(i, k), bw(i, k),
                               [&](double x) { return wishart_diag_density(delta, H(i, i), x); });
      else
        v = histogram_accuracy(p, n, lo(i, k), bw(i, k), [&](double x) {
          return wishart_offdiag_density(delta, H(i, i), H(k, k), H(i, k), x);
        });
      acc(i, k) = v;
      acc(k, i) = v;
    }
  return acc;
}

PosteriorSummary summarize(const FitResult& fit) {
  PosteriorSummary s;
  s.savs = savs_from_norms(fit.theta_hat, fit.z_sq_norms);
  s.wishart = fit_wishart(fit);
  return s;
}

}  // namespace vbvar
