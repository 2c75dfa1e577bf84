#include "vbvar/special_functions.hpp"

#include "vbvar/model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <limits>
#include <string>

namespace vbvar {

namespace {

struct GslQuiet {
  GslQuiet() { gsl_set_error_handler_off(); }
};
const GslQuiet gsl_quiet;

}  // namespace

double log_bessel_k(double order, double x) {
  if (!(x > 0) || !std::isfinite(x))
    throw ValidationError("log_bessel_k: argument must be positive and finite");
  if (!std::isfinite(order)) throw ValidationError("log_bessel_k: non-finite order");
  gsl_sf_result r;
  int status = gsl_sf_bessel_lnKnu_e(std::fabs(order), x, &r);  // K is even in the order
  if (status != GSL_SUCCESS || !std::isfinite(r.val))
    throw NumericalFault("log_bessel_k failed for order " + std::to_string(order) +
                         ", x " + std::to_string(x));
  return r.val;
}

double dlogK_dorder(double order, double x) {
  const double h = 1e-4 * std::max(1.0, std::fabs(order));
  return (log_bessel_k(order + h, x) - log_bessel_k(order - h, x)) / (2.0 * h);
}

double digamma(double x) {
  if (!(x > 0)) throw ValidationError("digamma: x must be > 0");
  return boost::math::digamma(x);
}

double trigamma(double x) {
  if (!(x > 0)) throw ValidationError("trigamma: x must be > 0");
  return boost::math::trigamma(x);
}

double log_gamma(double x) {
  if (!(x > 0)) throw ValidationError("log_gamma: x must be > 0");
  return boost::math::lgamma(x);
}

double log_multivariate_gamma(int d, double x) {
  if (d < 1) throw ValidationError("log_multivariate_gamma: d must be >= 1");
  if (!(x > 0.5 * (d - 1))) throw ValidationError("log_multivariate_gamma: x <= (d-1)/2");
  double s = 0.25 * d * (d - 1) * std::log(M_PI);
  for (int j = 1; j <= d; ++j) s += log_gamma(x + 0.5 * (1 - j));
  return s;
}

GIGMoments gig_moments(const GIGParams& p) {
  if (!(p.a > 0) || !(p.b > 0) || !std::isfinite(p.a) || !std::isfinite(p.b))
    throw ValidationError("gig_moments: a and b must be positive");
  const double w = std::sqrt(p.a * p.b);
  const double lk = log_bessel_k(p.zeta, w);
  const double ratio = std::exp(log_bessel_k(p.zeta + 1.0, w) - lk);
  GIGMoments m;
  m.mean = std::sqrt(p.b / p.a) * ratio;
  m.mean_inverse = std::sqrt(p.a / p.b) * ratio - 2.0 * p.zeta / p.b;
  m.mean_log = 0.5 * std::log(p.b / p.a) + dlogK_dorder(p.zeta, w);
  return m;
}

double gig_log_normalizer(const GIGParams& p) {
  return 0.5 * p.zeta * std::log(p.a / p.b) - std::log(2.0) -
         log_bessel_k(p.zeta, std::sqrt(p.a * p.b));
}

InvGammaMoments inverse_gamma_moments(double a, double b) {
  if (!(a > 0) || !(b > 0)) throw ValidationError("inverse gamma: a, b must be positive");
  InvGammaMoments m;
  m.mean = a > 1 ? b / (a - 1) : std::numeric_limits<double>::infinity();
  m.mean_inverse = a / b;
  m.mean_log = std::log(b) - digamma(a);
  return m;
}

double gamma_entropy(double shape, double rate) {
  return shape - std::log(rate) + log_gamma(shape) + (1.0 - shape) * digamma(shape);
}

double inverse_gamma_entropy(double shape, double scale) {
  return shape + std::log(scale) + log_gamma(shape) - (1.0 + shape) * digamma(shape);
}

double minimize_1d(const Fn1& f, double lower, double upper, double tol) {
  if (!(lower < upper)) throw ValidationError("minimize_1d: empty interval");
  if (!(tol > 0)) throw ValidationError("minimize_1d: tol must be > 0");
  auto g = [&](double x) {
    double v = f(x);
    if (!std::isfinite(v)) throw NumericalFault("minimize_1d: non-finite objective");
    return v;
  };
  // Brent's relative tolerance; sqrt(eps) is the best a function-value search can reach
  const double scale = std::max({1.0, std::fabs(lower), std::fabs(upper)});
  int bits = static_cast<int>(std::ceil(-std::log2(tol / scale))) + 1;
  bits = std::clamp(bits, 4, std::numeric_limits<double>::digits / 2);
  std::uintmax_t iters = 10000;
  auto r = boost::math::tools::brent_find_minima(g, lower, upper, bits, iters);
  return r.first;
}

double integrate_1d(const Fn1& f, double lower, double upper, double tol) {
  if (!(upper > lower)) throw ValidationError("integrate_1d: empty interval");
  double err = 0.0, l1 = 0.0;
  auto g = [&](double x) {
    double v = f(x);
    if (!std::isfinite(v)) throw NumericalFault("integrate_1d: non-finite integrand");
    return v;
  };
  double r = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lower, upper, 20,
                                                                            tol, &err, &l1);
  if (!(err <= std::max(1e3 * tol * std::fabs(r), 1e-300) || err <= 1e3 * tol * l1))
    throw NumericalFault("integrate_1d: no convergence (error estimate " + std::to_string(err) +
                         ")");
  return r;
}

}  // namespace vbvar
