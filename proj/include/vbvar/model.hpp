#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace vbvar {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Bad input or configuration (CLI exit code 1).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Something went wrong in the numerics (CLI exit code 2).
struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Mat y;  // T x d returns
  Mat x;  // T x p predictors, p may be 0
  std::vector<std::string> y_labels;
  std::vector<std::string> x_labels;
  std::vector<std::string> time_index;

  int T() const { return static_cast<int>(y.rows()); }
  int d() const { return static_cast<int>(y.cols()); }
  int p() const { return static_cast<int>(x.cols()); }
  int q() const { return d() + p() + 1; }

  // throws ValidationError
  void validate() const;
};

// Fills default labels / time index where missing and returns a validated dataset.
Dataset make_dataset(Mat y, Mat x = Mat());

struct Design {
  Mat Y;  // (T-1) x d
  Mat Z;  // (T-1) x (d+p+1), rows (1, x_{t-1}, y_{t-1})
  int d() const { return static_cast<int>(Y.cols()); }
  int q() const { return static_cast<int>(Z.cols()); }
  int T() const { return static_cast<int>(Y.rows()); }
};

Design build_design(const Dataset& ds);
// rows [begin, end) with their labels
Dataset slice_rows(const Dataset& ds, int begin, int end);

// new column i holds old column perm[i] (0-based)
Dataset permute(const Dataset& ds, const std::vector<int>& perm);

enum class Prior { Normal, AdaptiveLasso, NormalGamma, Horseshoe };
enum class Parametrization { DirectTheta, CholeskyLinearized };
enum class Factorization { Joint, RowIndependent };
enum class PredictiveKind { McXi, McTheta, Gaussian };

std::string to_string(Prior p);
std::string to_string(Parametrization p);
std::string to_string(Factorization f);
std::string to_string(PredictiveKind k);
Prior prior_from_string(const std::string& s);
Parametrization parametrization_from_string(const std::string& s);
Factorization factorization_from_string(const std::string& s);
PredictiveKind predictive_from_string(const std::string& s);

struct HyperParams {
  double a_nu = 0.01;
  double b_nu = 0.01;
  double tau = 100.0;
  double upsilon0 = 100.0;
  double h1 = 0.5;
  double h2 = 0.5;
  double h3 = 1.0;
};

struct Convergence {
  int max_iter = 1000;
  double tol_elbo = 1e-8;
  double tol_param = 1e-6;
};

struct ModelSpec {
  Prior prior = Prior::Horseshoe;
  Parametrization parametrization = Parametrization::DirectTheta;
  Factorization factorization = Factorization::Joint;
  HyperParams hyper;
  Convergence convergence;
  PredictiveKind predictive = PredictiveKind::Gaussian;
  int n_draws = 1000;
  int max_joint_dim = 4000;

  std::vector<std::string> errors() const;
  void validate() const;
};

struct RegressionMatrices {
  Mat theta;    // d x (d+p+1)
  Mat b_lower;  // strictly lower triangular, B = I - L
  Vec v_diag;

  Mat L() const;
  Mat omega() const;  // L' V L
  Mat A() const;      // L Theta
  void validate() const;
};

double spectral_radius(const Mat& m);

// y-lag block of a d x (d+p+1) coefficient matrix
inline Mat ar_block(const Mat& theta) {
  const auto d = theta.rows();
  return theta.rightCols(d);
}

}  // namespace vbvar
