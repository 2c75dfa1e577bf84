#pragma once

#include "vbvar/model.hpp"

#include <cstdint>
#include <limits>

namespace vbvar {

// Counter-based generator: output k of stream (seed, a, b) is a pure function of
// (seed, a, b, k), so streams for windows / replications / draws never interact.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double uniform();  // (0, 1)
  double normal();
  double gamma(double shape, double rate);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// draw from N(mean, A A') given a factor A (typically the lower Cholesky factor)
Vec mvn_draw(CounterRng& rng, const Vec& mean, const Mat& chol_lower);

// Cholesky factor, or a symmetric square root when cov is only semidefinite
Mat cov_factor(const Mat& cov);

}  // namespace vbvar
