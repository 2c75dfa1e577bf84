#pragma once

#include "vbvar/cavi.hpp"
#include "vbvar/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vbvar {

enum class Weighting { Size, InverseVol, Equal };
std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

struct BacktestSpec {
  int window = 360;
  std::vector<EstimatorSpec> estimators;
  double risk_aversion = 5.0;
  double tc_bps = 10.0;
  double weight_lo = -2.0;
  double weight_hi = 3.0;
  Weighting weighting = Weighting::Equal;
  Mat size;                   // T x d, required for Size weighting (checked when T is known)
  double return_scale = 0.01;  // converts the return units to decimals for the portfolio
  std::uint64_t seed = 1;

  std::vector<std::string> errors(int T, int d) const;
};

// one estimator's rolling forecasts; row k is forecast date k
struct ForecastPanel {
  std::string estimator;
  std::vector<std::string> dates;
  Mat forecast;
  Mat naive;
  Mat realized;
  Mat r2_weights;          // weights for the weighted R2 / CumSSE (rows sum to 1)
  std::vector<Mat> cov;    // trailing sample covariance used for allocation
  std::vector<int> carried_forward;  // 1 if the window's fit failed
};

std::vector<ForecastPanel> rolling_forecasts(const Dataset& ds, const BacktestSpec& spec,
                                             int threads = 1);

double r2_oos(const Vec& e_model, const Vec& e_naive);
double weighted_r2_oos(const Mat& e_model, const Mat& e_naive, const Mat& w);
Vec cum_sse_diff(const Mat& e_model, const Mat& e_naive, const Mat& w);

// gamma^{-1} cov^{-1} (mean + diag(cov)/2), clipped; ridged reports a singular covariance
Vec crra_weights(const Vec& mean, const Mat& cov, double gamma, double lo, double hi,
                 bool* ridged = nullptr);

struct PortfolioPath {
  Mat weights;   // n x k
  Vec gross;     // w' r
  Vec turnover;  // sum |w_t - drifted w_{t-1}|
  Vec net;       // gross - tc * turnover
  int ridged = 0;
};

// forecasts, covariances and realized returns already in decimal units
PortfolioPath portfolio_path(const Mat& forecast, const std::vector<Mat>& cov,
                             const Mat& realized, double gamma, double lo, double hi,
                             double tc_bps);

double cer(const Vec& returns, double gamma);  // per-period certainty equivalent
// annualized (x12) percentage difference CER(model) - CER(naive)
double cer_differential(const Vec& r_model, const Vec& r_naive, double gamma);

struct EstimatorReport {
  std::string estimator;
  Vec r2;                 // per asset
  double r2_weighted = 0.0;
  Vec cum_sse;            // per forecast date
  Vec cer_diff;           // per asset, single-asset portfolios
  double cer_diff_multi = 0.0;
  PortfolioPath model_portfolio;
  PortfolioPath naive_portfolio;
  int carried_forward = 0;
};

struct BacktestReport {
  std::vector<ForecastPanel> panels;
  std::vector<EstimatorReport> estimators;
};

BacktestReport evaluate_backtest(const std::vector<ForecastPanel>& panels,
                                 const BacktestSpec& spec);
BacktestReport run_backtest(const Dataset& ds, const BacktestSpec& spec, int threads = 1);

}  // namespace vbvar
