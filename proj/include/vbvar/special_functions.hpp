#pragma once

#include <functional>

namespace vbvar {

// log K_nu(x), x > 0, finite for large x
double log_bessel_k(double order, double x);

// d/d(order) log K_order(x) by central difference, h = 1e-4 * max(1, |order|)
double dlogK_dorder(double order, double x);

double digamma(double x);
double trigamma(double x);
double log_gamma(double x);
double log_multivariate_gamma(int d, double x);

// density proportional to x^(zeta-1) exp(-(a x + b / x) / 2)
struct GIGParams {
  double zeta;
  double a;
  double b;
};

struct GIGMoments {
  double mean;
  double mean_inverse;
  double mean_log;
};

GIGMoments gig_moments(const GIGParams& p);

// log normalizing constant: zeta/2 log(a/b) - log 2 - log K_zeta(sqrt(ab))
double gig_log_normalizer(const GIGParams& p);

// moments of the inverse-gamma with shape a, scale b
struct InvGammaMoments {
  double mean;          // b/(a-1), +inf when a <= 1
  double mean_inverse;  // a/b
  double mean_log;      // log b - digamma(a)
};
InvGammaMoments inverse_gamma_moments(double a, double b);

double gamma_entropy(double shape, double rate);
double inverse_gamma_entropy(double shape, double scale);

using Fn1 = std::function<double(double)>;

// golden-section style search (Brent); |x* - argmin| <= tol for unimodal f
double minimize_1d(const Fn1& f, double lower, double upper, double tol);

// adaptive Gauss-Kronrod; upper may be +infinity. tol is relative.
double integrate_1d(const Fn1& f, double lower, double upper, double tol);

}  // namespace vbvar
