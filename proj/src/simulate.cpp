#include "vbvar/simulate.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace vbvar {

std::vector<std::string> ScenarioSpec::errors() const {
  std::vector<std::string> e;
  if (d < 1) e.push_back("scenario d must be >= 1");
  if (T < 2) e.push_back("scenario T must be >= 2");
  if (n_reps < 1) e.push_back("scenario n_reps must be >= 1");
  if (!(sparsity > 0 && sparsity < 1)) e.push_back("scenario sparsity must lie in (0, 1)");
  if (burn_in < 0) e.push_back("scenario burn_in must be >= 0");
  if (noise_precision.size() > 0 && (noise_precision.rows() != d || noise_precision.cols() != d))
    e.push_back("scenario noise_precision must be d x d");
  if (estimators.empty()) e.push_back("scenario needs at least one estimator");
  for (const auto& est : estimators)
    for (const auto& m : est.model.errors()) e.push_back("estimator " + est.name + ": " + m);
  return e;
}

int zero_count(int d, double s) {
  return static_cast<int>(std::floor(s * d * d + 0.5 + 1e-9));
}

namespace {

double truncated_component(CounterRng& rng, bool positive) {
  // N(+-0.08, 0.1^2) restricted to |x| > 0.05 on its own side; acceptance ~0.62
  const double mean = positive ? 0.08 : -0.08;
  for (int k = 0; k < 100000; ++k) {
    double x = mean + 0.1 * rng.normal();
    if (positive ? x > 0.05 : x < -0.05) return x;
  }
  throw NumericalFault("truncated normal sampler did not accept");
}

}  // namespace

Mat generate_theta(int d, double s, CounterRng& rng) {
  if (!(s > 0 && s < 1)) throw ValidationError("generate_theta: s must lie in (0,1)");
  if (d < 1) throw ValidationError("generate_theta: d must be >= 1");
  const int n = d * d;
  const int zeros = zero_count(d, s);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {  // Fisher-Yates
      int k = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(idx[i], idx[k]);
    }
    Mat th = Mat::Zero(d, d);
    for (int i = zeros; i < n; ++i) {
      bool pos = rng.uniform() < 0.5;
      th(idx[i] / d, idx[i] % d) = truncated_component(rng, pos);
    }
    if (spectral_radius(th) < 1.0) return th;
  }
  throw NumericalFault("generate_theta: no stationary draw in 10000 attempts");
}

Dataset simulate_var(const Mat& theta, int T, const Mat& noise_precision, CounterRng& rng,
                     int burn_in) {
  const int d = static_cast<int>(theta.rows());
  if (T < 2) throw ValidationError("simulate_var: T must be >= 2");
  Vec c = Vec::Zero(d);
  Mat phi;
  if (theta.cols() == d) {
    phi = theta;
  } else if (theta.cols() == d + 1) {
    c = theta.col(0);
    phi = theta.rightCols(d);
  } else {
    throw ValidationError("simulate_var: theta must be d x d or d x (d+1)");
  }
  Mat cov = noise_precision.size() == 0 ? Mat(Mat::Identity(d, d)) : Mat(noise_precision.inverse());
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw ValidationError("simulate_var: noise precision not SPD");
  Mat chol = llt.matrixL();
  Mat y(T, d);
  Vec prev = Vec::Zero(d);
  for (int t = 0; t < burn_in + T; ++t) {
    Vec cur = c + phi * prev + mvn_draw(rng, Vec::Zero(d), chol);
    if (t >= burn_in) y.row(t - burn_in) = cur.transpose();
    prev = cur;
  }
  return make_dataset(y);
}

double frobenius_error(const Mat& theta_true, const Mat& theta_hat) {
  if (theta_true.rows() != theta_hat.rows() || theta_true.cols() != theta_hat.cols())
    throw ValidationError("frobenius_error: shape mismatch");
  return (theta_true - theta_hat).norm();
}

F1Result f1_score(const BoolMat& mask_true, const BoolMat& mask_hat) {
  if (mask_true.rows() != mask_hat.rows() || mask_true.cols() != mask_hat.cols())
    throw ValidationError("f1_score: shape mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < mask_true.size(); ++i) {
    bool t = mask_true(i), h = mask_hat(i);
    if (t && h) tp += 1;
    else if (!t && h) fp += 1;
    else if (t && !h) fn += 1;
  }
  F1Result r;
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

std::vector<ScenarioRecord> run_rep(const ScenarioSpec& spec, int rep) {
  CounterRng rth(spec.seed, static_cast<std::uint64_t>(rep), 0);
  CounterRng rdata(spec.seed, static_cast<std::uint64_t>(rep), 1);
  Mat phi = generate_theta(spec.d, spec.sparsity, rth);
  Mat full(spec.d, spec.d + 1);
  full.col(0).setConstant(spec.intercept);
  full.rightCols(spec.d) = phi;
  Dataset ds = simulate_var(full, spec.T, spec.noise_precision, rdata, spec.burn_in);
  Design design = build_design(ds);
  BoolMat truth = phi.array() != 0.0;
  std::vector<ScenarioRecord> out;
  for (const auto& est : spec.estimators) {
    ScenarioRecord r;
    r.rep = rep;
    r.estimator = est.name;
    r.prior = est.model.prior;
    r.parametrization = est.model.parametrization;
    try {
      FitResult f = fit_design(design, est.model);
      SparsePattern sp = savs_from_norms(f.theta_hat, f.z_sq_norms);
      Mat hat = ar_block(sp.theta_sparse);
      BoolMat mhat = ar_block(sp.mask.cast<double>()).array() != 0.0;
      r.frobenius = frobenius_error(phi, hat);
      r.f1 = f1_score(truth, mhat);
      r.wall_time_seconds = f.wall_time_seconds;
      r.iterations = f.iterations;
      r.converged = f.converged;
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec, int threads) {
  auto errs = spec.errors();
  if (!errs.empty()) throw ValidationError(errs.front());
  std::vector<std::vector<ScenarioRecord>> per_rep(spec.n_reps);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int rep = next++; rep < spec.n_reps; rep = next++) per_rep[rep] = run_rep(spec, rep);
  };
  const int nt = std::max(1, std::min(threads, spec.n_reps));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  ScenarioResult res;
  for (auto& v : per_rep)
    for (auto& r : v) res.records.push_back(std::move(r));
  return res;
}

}  // namespace vbvar
