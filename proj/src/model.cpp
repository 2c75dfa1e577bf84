#include "vbvar/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace vbvar {

void Dataset::validate() const {
  if (y.cols() < 1) throw ValidationError("dataset: need at least one return series");
  if (y.rows() < 2) throw ValidationError("dataset: need T >= 2 observations");
  if (x.size() > 0 && x.rows() != y.rows())
    throw ValidationError("dataset: predictors and returns have different lengths");
  if (!y.allFinite() || (x.size() > 0 && !x.allFinite()))
    throw ValidationError("dataset: missing or non-finite values");
  if (!y_labels.empty() && static_cast<int>(y_labels.size()) != d())
    throw ValidationError("dataset: label count does not match return columns");
  if (!x_labels.empty() && static_cast<int>(x_labels.size()) != p())
    throw ValidationError("dataset: label count does not match predictor columns");
  if (!time_index.empty()) {
    if (static_cast<int>(time_index.size()) != T())
      throw ValidationError("dataset: time index length does not match data");
  }
}

Dataset make_dataset(Mat y, Mat x) {
  Dataset ds;
  ds.y = std::move(y);
  ds.x = x.size() == 0 ? Mat(ds.y.rows(), 0) : std::move(x);
  for (int j = 0; j < ds.d(); ++j) ds.y_labels.push_back("y" + std::to_string(j + 1));
  for (int j = 0; j < ds.p(); ++j) ds.x_labels.push_back("x" + std::to_string(j + 1));
  for (int t = 0; t < ds.T(); ++t) ds.time_index.push_back(std::to_string(t + 1));
  ds.validate();
  return ds;
}

Design build_design(const Dataset& ds) {
  ds.validate();
  const int T = ds.T(), d = ds.d(), p = ds.p();
  Design out;
  out.Y = ds.y.bottomRows(T - 1);
  out.Z.resize(T - 1, d + p + 1);
  out.Z.col(0).setOnes();
  if (p > 0) out.Z.middleCols(1, p) = ds.x.topRows(T - 1);
  out.Z.rightCols(d) = ds.y.topRows(T - 1);
  return out;
}

Dataset slice_rows(const Dataset& ds, int begin, int end) {
  if (begin < 0 || end > ds.T() || begin >= end) throw ValidationError("slice_rows: bad range");
  Dataset s;
  s.y = ds.y.middleRows(begin, end - begin);
  s.x = ds.x.middleRows(begin, end - begin);
  s.y_labels = ds.y_labels;
  s.x_labels = ds.x_labels;
  if (!ds.time_index.empty())
    s.time_index.assign(ds.time_index.begin() + begin, ds.time_index.begin() + end);
  return s;
}

Dataset permute(const Dataset& ds, const std::vector<int>& perm) {
  const int d = ds.d();
  if (static_cast<int>(perm.size()) != d) throw ValidationError("permute: wrong length");
  std::vector<int> seen(d, 0);
  for (int k : perm) {
    if (k < 0 || k >= d || seen[k]) throw ValidationError("permute: not a permutation");
    seen[k] = 1;
  }
  Dataset out = ds;
  for (int i = 0; i < d; ++i) {
    out.y.col(i) = ds.y.col(perm[i]);
    if (!ds.y_labels.empty()) out.y_labels[i] = ds.y_labels[perm[i]];
  }
  return out;
}

std::string to_string(Prior p) {
  switch (p) {
    case Prior::Normal: return "normal";
    case Prior::AdaptiveLasso: return "lasso";
    case Prior::NormalGamma: return "normal_gamma";
    case Prior::Horseshoe: return "horseshoe";
  }
  return "?";
}

std::string to_string(Parametrization p) {
  return p == Parametrization::DirectTheta ? "direct" : "linearized";
}

std::string to_string(Factorization f) {
  return f == Factorization::Joint ? "joint" : "rows";
}

std::string to_string(PredictiveKind k) {
  switch (k) {
    case PredictiveKind::McXi: return "mc_xi";
    case PredictiveKind::McTheta: return "mc_theta";
    case PredictiveKind::Gaussian: return "gaussian";
  }
  return "?";
}

Prior prior_from_string(const std::string& s) {
  if (s == "normal") return Prior::Normal;
  if (s == "lasso" || s == "adaptive_lasso") return Prior::AdaptiveLasso;
  if (s == "normal_gamma" || s == "ng") return Prior::NormalGamma;
  if (s == "horseshoe" || s == "hs") return Prior::Horseshoe;
  throw ValidationError("unknown prior '" + s + "'");
}

Parametrization parametrization_from_string(const std::string& s) {
  if (s == "direct") return Parametrization::DirectTheta;
  if (s == "linearized" || s == "lvb") return Parametrization::CholeskyLinearized;
  throw ValidationError("unknown parametrization '" + s + "'");
}

Factorization factorization_from_string(const std::string& s) {
  if (s == "joint") return Factorization::Joint;
  if (s == "rows" || s == "row") return Factorization::RowIndependent;
  throw ValidationError("unknown factorization '" + s + "'");
}

PredictiveKind predictive_from_string(const std::string& s) {
  if (s == "mc_xi") return PredictiveKind::McXi;
  if (s == "mc_theta") return PredictiveKind::McTheta;
  if (s == "gaussian") return PredictiveKind::Gaussian;
  throw ValidationError("unknown predictive strategy '" + s + "'");
}

std::vector<std::string> ModelSpec::errors() const {
  std::vector<std::string> e;
  auto pos = [&](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) e.push_back(std::string(name) + " must be > 0");
  };
  pos(hyper.a_nu, "a_nu");
  pos(hyper.b_nu, "b_nu");
  pos(hyper.tau, "tau");
  pos(hyper.upsilon0, "upsilon0");
  pos(hyper.h1, "h1");
  pos(hyper.h2, "h2");
  pos(hyper.h3, "h3");
  if (convergence.max_iter < 1) e.push_back("max_iter must be >= 1");
  pos(convergence.tol_elbo, "tol_elbo");
  pos(convergence.tol_param, "tol_param");
  if (n_draws < 1) e.push_back("draws must be >= 1");
  if (max_joint_dim < 1) e.push_back("max_joint_dim must be >= 1");
  return e;
}

void ModelSpec::validate() const {
  auto e = errors();
  if (!e.empty()) throw ValidationError("model spec: " + e.front());
}

Mat RegressionMatrices::L() const {
  return Mat::Identity(b_lower.rows(), b_lower.cols()) - b_lower;
}

Mat RegressionMatrices::omega() const {
  Mat l = L();
  return l.transpose() * v_diag.asDiagonal() * l;
}

Mat RegressionMatrices::A() const { return L() * theta; }

void RegressionMatrices::validate() const {
  const auto d = theta.rows();
  if (b_lower.rows() != d || b_lower.cols() != d || v_diag.size() != d)
    throw ValidationError("regression matrices: dimension mismatch");
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index k = i; k < d; ++k)
      if (b_lower(i, k) != 0.0) throw ValidationError("B must be strictly lower triangular");
  if ((v_diag.array() <= 0).any()) throw ValidationError("V must be positive");
}

double spectral_radius(const Mat& m) {
  if (m.rows() != m.cols()) throw ValidationError("spectral_radius: matrix not square");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace vbvar
