#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vbvar/model.hpp"

#include <random>

using namespace vbvar;

TEST_CASE("design lags y and prepends the intercept") {
  Mat y(3, 1);
  y << 1, 2, 3;
  Design des = build_design(make_dataset(y));
  CHECK(des.Y.rows() == 2);
  CHECK(des.Y(0, 0) == 2);
  CHECK(des.Y(1, 0) == 3);
  Mat z(2, 2);
  z << 1, 1, 1, 2;
  CHECK(des.Z == z);
}

TEST_CASE("design dimensions") {
  Design a = build_design(make_dataset(Mat::Random(2, 2), Mat::Random(2, 1)));
  CHECK(a.Y.rows() == 1);
  CHECK(a.Z.rows() == 1);
  CHECK(a.Z.cols() == 4);

  Design b = build_design(make_dataset(Mat::Random(360, 15), Mat::Random(360, 12)));
  CHECK(b.Z.cols() == 28);
  CHECK(b.Z.rows() == 359);
}

TEST_CASE("design rows are (1, x_{t-1}, y_{t-1})") {
  Mat y = Mat::Random(6, 2), x = Mat::Random(6, 3);
  Design des = build_design(make_dataset(y, x));
  for (int t = 1; t < 6; ++t) {
    CHECK(des.Z(t - 1, 0) == 1.0);
    for (int k = 0; k < 3; ++k) CHECK(des.Z(t - 1, 1 + k) == x(t - 1, k));
    for (int k = 0; k < 2; ++k) {
      CHECK(des.Z(t - 1, 4 + k) == y(t - 1, k));
      CHECK(des.Y(t - 1, k) == y(t, k));
    }
  }
}

TEST_CASE("invalid datasets are rejected") {
  CHECK_THROWS_AS(make_dataset(Mat::Random(1, 2)), ValidationError);
  Mat y = Mat::Random(5, 2);
  y(2, 1) = NAN;
  CHECK_THROWS_AS(make_dataset(y), ValidationError);
  Mat x = Mat::Random(5, 1);
  x(0, 0) = INFINITY;
  CHECK_THROWS_AS(make_dataset(Mat::Random(5, 2), x), ValidationError);
  CHECK_THROWS_AS(make_dataset(Mat::Random(5, 2), Mat::Random(4, 1)), ValidationError);
  CHECK_THROWS_AS(make_dataset(Mat(5, 0)), ValidationError);
}

TEST_CASE("permute") {
  Dataset ds = make_dataset(Mat::Random(10, 3), Mat::Random(10, 2));
  SUBCASE("identity") {
    Dataset p = permute(ds, {0, 1, 2});
    CHECK(p.y == ds.y);
    CHECK(p.y_labels == ds.y_labels);
  }
  SUBCASE("swap twice") {
    Dataset p = permute(permute(ds, {1, 0, 2}), {1, 0, 2});
    CHECK(p.y == ds.y);
    CHECK(p.y_labels == ds.y_labels);
  }
  SUBCASE("cyclic") {
    Dataset p = permute(ds, {1, 2, 0});
    CHECK(p.y.col(0) == ds.y.col(1));
    CHECK(p.y_labels[0] == ds.y_labels[1]);
    CHECK(p.x == ds.x);
  }
  SUBCASE("bad permutations") {
    CHECK_THROWS_AS(permute(ds, {0, 0, 1}), ValidationError);
    CHECK_THROWS_AS(permute(ds, {0, 1}), ValidationError);
    CHECK_THROWS_AS(permute(ds, {0, 1, 3}), ValidationError);
  }
}

TEST_CASE("design commutes with permutation") {
  std::mt19937_64 g(3);
  Dataset ds = make_dataset(Mat::Random(12, 4), Mat::Random(12, 2));
  std::vector<int> perm{2, 0, 3, 1};
  Design a = build_design(permute(ds, perm));
  Design b = build_design(ds);
  const int p = 2;
  for (int i = 0; i < 4; ++i) {
    CHECK(a.Y.col(i) == b.Y.col(perm[i]));
    CHECK(a.Z.col(1 + p + i) == b.Z.col(1 + p + perm[i]));
  }
  CHECK(a.Z.leftCols(1 + p) == b.Z.leftCols(1 + p));
}

TEST_CASE("slice_rows keeps labels") {
  Dataset ds = make_dataset(Mat::Random(10, 2), Mat::Random(10, 1));
  Dataset s = slice_rows(ds, 3, 7);
  CHECK(s.T() == 4);
  CHECK(s.time_index.front() == ds.time_index[3]);
  CHECK(s.x.row(0) == ds.x.row(3));
  CHECK_THROWS_AS(slice_rows(ds, 5, 5), ValidationError);
}

TEST_CASE("spectral radius of a diagonal matrix is max |diag|") {
  Mat m = Vec(Eigen::Vector3d(0.3, -0.8, 0.5)).asDiagonal();
  CHECK(spectral_radius(m) == doctest::Approx(0.8).epsilon(1e-14));
  Mat rot(2, 2);
  rot << 0, -0.9, 0.9, 0;
  CHECK(spectral_radius(rot) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("regression matrices") {
  RegressionMatrices r;
  r.theta = Mat::Random(3, 4);
  r.b_lower = Mat::Zero(3, 3);
  r.b_lower(1, 0) = 0.4;
  r.b_lower(2, 0) = -0.2;
  r.b_lower(2, 1) = 0.7;
  r.v_diag = Eigen::Vector3d(1.0, 2.0, 0.5);
  r.validate();
  Mat L = Mat::Identity(3, 3) - r.b_lower;
  CHECK(r.L().isApprox(L));
  CHECK(r.omega().isApprox(L.transpose() * r.v_diag.asDiagonal() * L));
  CHECK(r.A().isApprox(L * r.theta));

  RegressionMatrices bad = r;
  bad.b_lower(0, 2) = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = r;
  bad.v_diag(1) = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("model spec validation") {
  ModelSpec s;
  CHECK(s.errors().empty());
  s.convergence.tol_elbo = 0.0;
  CHECK_FALSE(s.errors().empty());
  s = ModelSpec{};
  s.convergence.max_iter = 0;
  CHECK_FALSE(s.errors().empty());
  s = ModelSpec{};
  s.hyper.h3 = -1.0;
  CHECK_FALSE(s.errors().empty());
  s = ModelSpec{};
  s.predictive = PredictiveKind::McXi;
  s.n_draws = 0;
  CHECK_FALSE(s.errors().empty());
}

TEST_CASE("enum strings round trip") {
  for (auto p : {Prior::Normal, Prior::AdaptiveLasso, Prior::NormalGamma, Prior::Horseshoe})
    CHECK(prior_from_string(to_string(p)) == p);
  for (auto p : {Parametrization::DirectTheta, Parametrization::CholeskyLinearized})
    CHECK(parametrization_from_string(to_string(p)) == p);
  for (auto f : {Factorization::Joint, Factorization::RowIndependent})
    CHECK(factorization_from_string(to_string(f)) == f);
  for (auto k : {PredictiveKind::McXi, PredictiveKind::McTheta, PredictiveKind::Gaussian})
    CHECK(predictive_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(prior_from_string("ridge"), ValidationError);
}
