#include "vbvar/rng.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace vbvar {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  key_ = splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xd1342543de82ef95ULL + 1));
}

CounterRng::result_type CounterRng::operator()() {
  ++counter_;
  // two rounds of mixing over key + counter
  return splitmix64(splitmix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL) ^ key_);
}

double CounterRng::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  boost::random::normal_distribution<double> n(0.0, 1.0);
  return n(*this);
}

double CounterRng::gamma(double shape, double rate) {
  boost::random::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(*this);
}

Vec mvn_draw(CounterRng& rng, const Vec& mean, const Mat& chol_lower) {
  Vec e(mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  return mean + chol_lower * e;
}

Mat cov_factor(const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw NumericalFault("covariance is not positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace vbvar
