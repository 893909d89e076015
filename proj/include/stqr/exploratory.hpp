#pragma once

// Parametric mean model (intercept, linear trend, covariates, harmonics and
// AR(p) residual feedback) and the residual diagnostics used to expose
// seasonal heteroskedasticity.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stqr/data.hpp"
#include "stqr/error.hpp"
#include "stqr/harmonics.hpp"
#include "stqr/linalg.hpp"

namespace stqr {

struct MeanModelFit {
  double intercept = 0.0;
  double trend = 0.0;                 // per unit normalized time
  Eigen::VectorXd covariate_coeffs;   // one per covariate series
  FourierCoeffs fourier;
  Eigen::VectorXd ar_coeffs;          // rho_1..rho_p
  Eigen::VectorXd residuals;          // aligned with `cells`
  Eigen::VectorXd fitted;
  std::vector<Eigen::Index> cells;    // observed cell index of each residual
  double sigma = 0.0;                 // residual standard deviation
  int iterations = 0;

  int day(std::size_t i) const { return static_cast<int>(cells[i] % kDaysPerYear) + 1; }
};

struct MeanModelOptions {
  int fourier_order = kDefaultFourierOrder;
  int ar_order = 1;
  int max_iterations = 50;
  double tolerance = 1e-8;
};

inline MeanModelFit fit_mean_model(const StationSeries& series, const std::vector<CovariateSeries>& covariates,
                                   const MeanModelOptions& opt = {}) {
  const int k = opt.fourier_order;
  const int p = opt.ar_order;
  const auto n_cov = static_cast<int>(covariates.size());
  const int q = 2 + n_cov + 2 * k;
  for (const auto& c : covariates)
    if (c.start_year != series.start_year || c.years() != series.years())
      throw SchemaError("covariate '" + c.name + "' does not span the series window");

  std::vector<Eigen::Index> cells;
  std::vector<Eigen::Index> row_of(static_cast<std::size_t>(series.cells()), -1);
  for (Eigen::Index c = 0; c < series.cells(); ++c)
    if (series.observed_cell(c)) {
      row_of[static_cast<std::size_t>(c)] = static_cast<Eigen::Index>(cells.size());
      cells.push_back(c);
    }
  const auto n = static_cast<Eigen::Index>(cells.size());
  if (n < 10 * (q + p)) throw DomainError("too few observed days for the mean model");

  std::vector<std::string> names{"intercept", "time"};
  for (const auto& c : covariates) names.push_back("x:" + c.name);
  for (int j = 1; j <= k; ++j) names.push_back("sin" + std::to_string(j));
  for (int j = 1; j <= k; ++j) names.push_back("cos" + std::to_string(j));
  for (int i = 1; i <= p; ++i) names.push_back("ar" + std::to_string(i));

  Eigen::MatrixXd X(n, q);
  Eigen::VectorXd y(n);
  const long n_cells = series.cells();
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto c = cells[static_cast<std::size_t>(r)];
    y(r) = series.value_cell(c);
    X(r, 0) = 1.0;
    X(r, 1) = normalized_time(c + 1, n_cells);
    for (int j = 0; j < n_cov; ++j) X(r, 2 + j) = covariates[static_cast<std::size_t>(j)].at_cell(c);
    const int d = static_cast<int>(c % kDaysPerYear) + 1;
    X.block(r, 2 + n_cov, 1, 2 * k) = fs_design_row(d, k).transpose();
  }

  std::vector<std::string> base_names(names.begin(), names.begin() + q);
  Eigen::VectorXd beta = least_squares(X, y, base_names);
  Eigen::VectorXd e = y - X * beta;
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(p);

  // Rows whose p lags are all observed cells.
  std::vector<Eigen::Index> ar_rows;
  if (p > 0)
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto c = cells[static_cast<std::size_t>(r)];
      bool ok = c >= p;
      for (int i = 1; ok && i <= p; ++i) ok = row_of[static_cast<std::size_t>(c - i)] >= 0;
      if (ok) ar_rows.push_back(r);
    }

  int iter = 0;
  if (p > 0) {
    const auto m = static_cast<Eigen::Index>(ar_rows.size());
    if (m < 10 * (q + p)) throw DomainError("too few consecutive observed days for the AR terms");
    Eigen::MatrixXd Xa(m, q + p);
    Eigen::VectorXd ya(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      Xa.row(i).head(q) = X.row(ar_rows[static_cast<std::size_t>(i)]);
      ya(i) = y(ar_rows[static_cast<std::size_t>(i)]);
    }
    for (iter = 1; iter <= opt.max_iterations; ++iter) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto c = cells[static_cast<std::size_t>(ar_rows[static_cast<std::size_t>(i)])];
        for (int l = 1; l <= p; ++l) Xa(i, q + l - 1) = e(row_of[static_cast<std::size_t>(c - l)]);
      }
      const Eigen::VectorXd coef = least_squares(Xa, ya, names);
      const double change = std::max((coef.head(q) - beta).cwiseAbs().maxCoeff(),
                                     (coef.tail(p) - rho).cwiseAbs().maxCoeff());
      beta = coef.head(q);
      rho = coef.tail(p);
      e = y - X * beta;
      if (change < opt.tolerance) break;
    }
    iter = std::min(iter, opt.max_iterations);
  }

  MeanModelFit fit;
  fit.intercept = beta(0);
  fit.trend = beta(1);
  fit.covariate_coeffs = beta.segment(2, n_cov);
  fit.fourier = FourierCoeffs::from_stacked(beta.segment(2 + n_cov, 2 * k));
  fit.ar_coeffs = rho;
  fit.fitted = X * beta;
  if (p > 0)
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto c = cells[static_cast<std::size_t>(r)];
      if (c < p) continue;
      bool ok = true;
      for (int l = 1; ok && l <= p; ++l) ok = row_of[static_cast<std::size_t>(c - l)] >= 0;
      if (!ok) continue;
      for (int l = 1; l <= p; ++l) fit.fitted(r) += rho(l - 1) * e(row_of[static_cast<std::size_t>(c - l)]);
    }
  fit.residuals = y - fit.fitted;
  fit.cells = std::move(cells);
  const double mean_r = fit.residuals.mean();
  fit.sigma = std::sqrt((fit.residuals.array() - mean_r).square().sum() / static_cast<double>(n - 1));
  fit.iterations = iter;
  return fit;
}

// Sample autocorrelation: acf[h] = sum (x_t - m)(x_{t+h} - m) / sum (x_t - m)^2.
inline Eigen::VectorXd acf(const Eigen::Ref<const Eigen::VectorXd>& x, int max_lag) {
  const auto n = x.size();
  if (max_lag < 0 || n <= max_lag) throw DomainError("acf needs len(x) > max_lag");
  const Eigen::VectorXd c = x.array() - x.mean();
  const double denom = c.squaredNorm();
  if (!(denom > 0.0)) throw DomainError("acf of a zero-variance series");
  Eigen::VectorXd r(max_lag + 1);
  for (int h = 0; h <= max_lag; ++h) r(h) = c.head(n - h).dot(c.tail(n - h)) / denom;
  return r;
}

// Gap-aware variant over a cell grid: NaN marks a missing cell and only pairs
// where both cells are present contribute. Matches acf() when nothing is missing.
inline Eigen::VectorXd acf_with_gaps(const Eigen::Ref<const Eigen::VectorXd>& x, int max_lag) {
  const auto n = x.size();
  if (max_lag < 0 || n <= max_lag) throw DomainError("acf needs len(x) > max_lag");
  double sum = 0.0;
  Eigen::Index cnt = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isnan(x(i))) {
      sum += x(i);
      ++cnt;
    }
  if (cnt <= max_lag) throw DomainError("acf needs more observations than max_lag");
  const double m = sum / static_cast<double>(cnt);
  double denom = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isnan(x(i))) denom += (x(i) - m) * (x(i) - m);
  if (!(denom > 0.0)) throw DomainError("acf of a zero-variance series");
  Eigen::VectorXd r(max_lag + 1);
  for (int h = 0; h <= max_lag; ++h) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + h < n; ++i)
      if (!std::isnan(x(i)) && !std::isnan(x(i + h))) s += (x(i) - m) * (x(i + h) - m);
    r(h) = s / denom;
  }
  return r;
}

struct HeterogeneityReport {
  Eigen::VectorXd acf_resid;
  Eigen::VectorXd acf_resid_sq;
  Eigen::VectorXd doy_var_resid;  // length 365, NaN where fewer than 2 values
  Eigen::VectorXd doy_mean_resid;
  double band = 0.0;              // 95% white-noise band, 1.96 / sqrt(n)
};

inline HeterogeneityReport heterogeneity_report(const MeanModelFit& fit, int max_lag) {
  const auto n = fit.residuals.size();
  if (n == 0) throw DomainError("fit has no residuals");
  const Eigen::Index span = fit.cells.back() - fit.cells.front() + 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd grid = Eigen::VectorXd::Constant(span, nan);
  Eigen::VectorXd grid_sq = Eigen::VectorXd::Constant(span, nan);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kDaysPerYear), sum_sq = Eigen::VectorXd::Zero(kDaysPerYear);
  Eigen::VectorXi cnt = Eigen::VectorXi::Zero(kDaysPerYear);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto pos = fit.cells[static_cast<std::size_t>(i)] - fit.cells.front();
    const double r = fit.residuals(i);
    grid(pos) = r;
    grid_sq(pos) = r * r;
    const int d = fit.day(static_cast<std::size_t>(i)) - 1;
    sum(d) += r;
    sum_sq(d) += r * r;
    ++cnt(d);
  }
  HeterogeneityReport rep;
  rep.acf_resid = acf_with_gaps(grid, max_lag);
  rep.acf_resid_sq = acf_with_gaps(grid_sq, max_lag);
  rep.doy_var_resid = Eigen::VectorXd::Constant(kDaysPerYear, nan);
  rep.doy_mean_resid = Eigen::VectorXd::Constant(kDaysPerYear, nan);
  for (int d = 0; d < kDaysPerYear; ++d) {
    if (cnt(d) >= 1) rep.doy_mean_resid(d) = sum(d) / cnt(d);
    if (cnt(d) >= 2) rep.doy_var_resid(d) = (sum_sq(d) - sum(d) * sum(d) / cnt(d)) / (cnt(d) - 1);
  }
  rep.band = 1.96 / std::sqrt(static_cast<double>(n));
  return rep;
}

}  // namespace stqr
