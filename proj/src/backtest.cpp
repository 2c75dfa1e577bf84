#include "vbvar/backtest.hpp"

#include "vbvar/posterior.hpp"
#include "vbvar/predict.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <optional>
#include <thread>

namespace vbvar {

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::Size: return "size";
    case Weighting::InverseVol: return "inverse_vol";
    case Weighting::Equal: return "equal";
  }
  return "?";
}

Weighting weighting_from_string(const std::string& s) {
  if (s == "size") return Weighting::Size;
  if (s == "inverse_vol") return Weighting::InverseVol;
  if (s == "equal") return Weighting::Equal;
  throw ValidationError("unknown weighting '" + s + "'");
}

std::vector<std::string> BacktestSpec::errors(int T, int d) const {
  std::vector<std::string> e;
  if (window < 2) e.push_back("backtest window must be >= 2");
  if (T >= 0 && window >= T) e.push_back("backtest window must be < T");
  if (!(risk_aversion > 0)) e.push_back("risk_aversion must be > 0");
  if (!(tc_bps >= 0)) e.push_back("tc_bps must be >= 0");
  if (!(weight_lo < weight_hi)) e.push_back("weight_bounds must satisfy lo < hi");
  if (!(return_scale > 0)) e.push_back("return_scale must be > 0");
  if (weighting == Weighting::Size && T >= 0) {
    if (size.size() == 0) e.push_back("size weighting needs a size series");
    else if (T >= 0 && (size.rows() != T || size.cols() != d))
      e.push_back("size series must be T x d");
    else if ((size.array() <= 0).any()) e.push_back("size series must be positive");
  }
  if (estimators.empty()) e.push_back("backtest needs at least one estimator");
  for (const auto& est : estimators)
    for (const auto& m : est.model.errors()) e.push_back("estimator " + est.name + ": " + m);
  return e;
}

namespace {

Vec regressor(const Dataset& ds, int t) {
  Vec z(ds.q());
  z(0) = 1.0;
  if (ds.p() > 0) z.segment(1, ds.p()) = ds.x.row(t).transpose();
  z.tail(ds.d()) = ds.y.row(t).transpose();
  return z;
}

Mat sample_cov(const Mat& y) {
  Mat c = y.rowwise() - y.colwise().mean();
  return c.transpose() * c / static_cast<double>(y.rows() - 1);
}

// predictive mean for date t from a fit on rows [fit_end - window, fit_end)
Vec forecast_at(const Dataset& ds, const BacktestSpec& spec, int est, int fit_end, int t) {
  Dataset sub = slice_rows(ds, fit_end - spec.window, fit_end);
  const ModelSpec& m = spec.estimators[est].model;
  FitResult f = fit(sub, m);
  WishartApprox w = fit_wishart(f);
  CounterRng rng(spec.seed, static_cast<std::uint64_t>(est), static_cast<std::uint64_t>(t));
  try {
    return predict(f, w, regressor(ds, t - 1), rng).mean;
  } catch (const ValidationError& e) {
    // the window's fit does not admit the configured predictive (e.g. v <= 2 for the Gaussian)
    throw NumericalFault(e.what());
  }
}

}  // namespace

std::vector<ForecastPanel> rolling_forecasts(const Dataset& ds, const BacktestSpec& spec,
                                             int threads) {
  ds.validate();
  auto errs = spec.errors(ds.T(), ds.d());
  if (!errs.empty()) throw ValidationError(errs.front());
  const int T = ds.T(), d = ds.d(), W = spec.window;
  const int nf = T - W;
  const int ne = static_cast<int>(spec.estimators.size());

  std::vector<ForecastPanel> panels(ne);
  for (int e = 0; e < ne; ++e) {
    auto& p = panels[e];
    p.estimator = spec.estimators[e].name;
    p.forecast.resize(nf, d);
    p.naive.resize(nf, d);
    p.realized.resize(nf, d);
    p.r2_weights.resize(nf, d);
    p.cov.resize(nf);
    p.carried_forward.assign(nf, 0);
    for (int k = 0; k < nf; ++k) {
      const int t = W + k;
      Mat win = ds.y.middleRows(t - W, W);
      p.dates.push_back(ds.time_index.empty() ? std::to_string(t + 1) : ds.time_index[t]);
      p.naive.row(k) = win.colwise().mean();
      p.realized.row(k) = ds.y.row(t);
      p.cov[k] = sample_cov(win);
      Vec w(d);
      switch (spec.weighting) {
        case Weighting::Equal: w.setOnes(); break;
        case Weighting::InverseVol: w = p.cov[k].diagonal().cwiseSqrt().cwiseInverse(); break;
        case Weighting::Size:
          w = spec.size.middleRows(t - W, W).colwise().mean().transpose().cwiseInverse();
          break;
      }
      if (!w.allFinite()) throw NumericalFault("R2 weights are not finite (zero volatility?)");
      p.r2_weights.row(k) = (w / w.sum()).transpose();
    }
  }

  // fits are independent across (estimator, window)
  std::vector<std::optional<Vec>> out(static_cast<size_t>(ne) * nf);
  std::vector<std::string> fault(out.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < static_cast<int>(out.size()); i = next++) {
      const int e = i / nf, k = i % nf, t = W + k;
      try {
        out[i] = forecast_at(ds, spec, e, t, t);
      } catch (const NumericalFault& ex) {
        fault[i] = ex.what();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(out.size())));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (int e = 0; e < ne; ++e) {
    int last_ok = -1;
    for (int k = 0; k < nf; ++k) {
      const int i = e * nf + k, t = W + k;
      if (out[i]) {
        panels[e].forecast.row(k) = out[i]->transpose();
        last_ok = k;
        continue;
      }
      spdlog::warn("backtest: fit failed for {} at {} ({}); carrying forward", panels[e].estimator,
                   panels[e].dates[k], fault[i]);
      if (last_ok < 0) throw NumericalFault("backtest: first window fit failed: " + fault[i]);
      panels[e].forecast.row(k) = forecast_at(ds, spec, e, W + last_ok, t).transpose();
      panels[e].carried_forward[k] = 1;
    }
  }
  return panels;
}

double r2_oos(const Vec& e_model, const Vec& e_naive) {
  if (e_model.size() != e_naive.size()) throw ValidationError("r2_oos: length mismatch");
  double sn = e_naive.squaredNorm();
  if (!(sn > 0)) throw ValidationError("r2_oos: naive SSE is zero");
  return 1.0 - e_model.squaredNorm() / sn;
}

double weighted_r2_oos(const Mat& e_model, const Mat& e_naive, const Mat& w) {
  if (e_model.rows() != w.rows() || e_model.cols() != w.cols() || e_naive.rows() != w.rows() ||
      e_naive.cols() != w.cols())
    throw ValidationError("weighted_r2_oos: shape mismatch");
  if ((w.array() <= 0).any()) throw ValidationError("weighted_r2_oos: weights must be positive");
  double num = (w.array() * e_model.array().square()).sum();
  double den = (w.array() * e_naive.array().square()).sum();
  if (!(den > 0)) throw ValidationError("weighted_r2_oos: naive SSE is zero");
  return 1.0 - num / den;
}

Vec cum_sse_diff(const Mat& e_model, const Mat& e_naive, const Mat& w) {
  if (e_model.rows() != w.rows() || e_model.cols() != w.cols() || e_naive.rows() != w.rows() ||
      e_naive.cols() != w.cols())
    throw ValidationError("cum_sse_diff: shape mismatch");
  if ((w.array() <= 0).any()) throw ValidationError("cum_sse_diff: weights must be positive");
  Vec out(e_model.rows());
  double acc = 0.0;
  for (Eigen::Index t = 0; t < e_model.rows(); ++t) {
    double en = w.row(t).dot(e_naive.row(t));
    double em = w.row(t).dot(e_model.row(t));
    acc += en * en - em * em;
    out(t) = acc;
  }
  return out;
}

Vec crra_weights(const Vec& mean, const Mat& cov, double gamma, double lo, double hi, bool* ridged) {
  if (!(gamma > 0)) throw ValidationError("crra_weights: gamma must be > 0");
  const auto d = mean.size();
  Vec rhs = mean + 0.5 * cov.diagonal();
  Eigen::LLT<Mat> llt(cov);
  bool r = false;
  Vec w;
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) {
    w = llt.solve(rhs) / gamma;
  } else {
    r = true;
    double jitter = 1e-8 * std::max(cov.trace() / d, 1e-300);
    Mat c = cov + jitter * Mat::Identity(d, d);
    Eigen::LLT<Mat> l2(c);
    if (l2.info() != Eigen::Success) throw NumericalFault("crra_weights: covariance not PSD");
    w = l2.solve(rhs) / gamma;
  }
  if (ridged) *ridged = r;
  return w.cwiseMax(lo).cwiseMin(hi);
}

PortfolioPath portfolio_path(const Mat& forecast, const std::vector<Mat>& cov,
                             const Mat& realized, double gamma, double lo, double hi,
                             double tc_bps) {
  const auto n = forecast.rows(), k = forecast.cols();
  PortfolioPath p;
  p.weights.resize(n, k);
  p.gross.resize(n);
  p.turnover.resize(n);
  p.net.resize(n);
  Vec drifted = Vec::Zero(k);
  for (Eigen::Index t = 0; t < n; ++t) {
    bool ridged = false;
    Vec w = crra_weights(forecast.row(t).transpose(), cov[t], gamma, lo, hi, &ridged);
    p.ridged += ridged;
    Vec r = realized.row(t).transpose();
    p.weights.row(t) = w.transpose();
    p.turnover(t) = (w - drifted).cwiseAbs().sum();
    p.gross(t) = w.dot(r);
    p.net(t) = p.gross(t) - tc_bps * 1e-4 * p.turnover(t);
    // risky positions grow with their own return, the remainder earns zero excess return
    drifted = w.cwiseProduct((1.0 + r.array()).matrix()) / (1.0 + p.gross(t));
  }
  return p;
}

double cer(const Vec& returns, double gamma) {
  if (!(gamma > 0)) throw ValidationError("cer: gamma must be > 0");
  if (returns.size() == 0) throw ValidationError("cer: empty series");
  double u = 0.0;
  for (Eigen::Index t = 0; t < returns.size(); ++t) {
    double W = 1.0 + returns(t);
    if (!(W > 0)) throw NumericalFault("cer: non-positive wealth, utility undefined");
    u += gamma == 1.0 ? std::log(W) : std::pow(W, 1.0 - gamma) / (1.0 - gamma);
  }
  u /= static_cast<double>(returns.size());
  if (gamma == 1.0) return std::exp(u) - 1.0;
  return std::pow(u * (1.0 - gamma), 1.0 / (1.0 - gamma)) - 1.0;
}

double cer_differential(const Vec& r_model, const Vec& r_naive, double gamma) {
  return 12.0 * 100.0 * (cer(r_model, gamma) - cer(r_naive, gamma));
}

BacktestReport evaluate_backtest(const std::vector<ForecastPanel>& panels,
                                 const BacktestSpec& spec) {
  BacktestReport rep;
  rep.panels = panels;
  const double s = spec.return_scale;
  for (const auto& p : panels) {
    EstimatorReport er;
    er.estimator = p.estimator;
    const auto d = p.realized.cols();
    Mat em = p.realized - p.forecast;
    Mat en = p.realized - p.naive;
    er.r2.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) er.r2(i) = r2_oos(em.col(i), en.col(i));
    er.r2_weighted = weighted_r2_oos(em, en, p.r2_weights);
    er.cum_sse = cum_sse_diff(em, en, p.r2_weights);

    Mat fm = s * p.forecast, fn = s * p.naive, rr = s * p.realized;
    std::vector<Mat> cov(p.cov.size());
    for (size_t t = 0; t < cov.size(); ++t) cov[t] = s * s * p.cov[t];
    const double g = spec.risk_aversion;
    er.model_portfolio = portfolio_path(fm, cov, rr, g, spec.weight_lo, spec.weight_hi, spec.tc_bps);
    er.naive_portfolio = portfolio_path(fn, cov, rr, g, spec.weight_lo, spec.weight_hi, spec.tc_bps);
    er.cer_diff_multi = cer_differential(er.model_portfolio.net, er.naive_portfolio.net, g);
    er.cer_diff.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      std::vector<Mat> ci(cov.size());
      for (size_t t = 0; t < cov.size(); ++t) ci[t] = cov[t].block(i, i, 1, 1);
      auto pm = portfolio_path(fm.col(i), ci, rr.col(i), g, spec.weight_lo, spec.weight_hi, spec.tc_bps);
      auto pn = portfolio_path(fn.col(i), ci, rr.col(i), g, spec.weight_lo, spec.weight_hi, spec.tc_bps);
      er.cer_diff(i) = cer_differential(pm.net, pn.net, g);
    }
    for (int c : p.carried_forward) er.carried_forward += c;
    rep.estimators.push_back(std::move(er));
  }
  return rep;
}

BacktestReport run_backtest(const Dataset& ds, const BacktestSpec& spec, int threads) {
  return evaluate_backtest(rolling_forecasts(ds, spec, threads), spec);
}

}  // namespace vbvar
