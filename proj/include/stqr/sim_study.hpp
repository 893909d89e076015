#pragma once

// Synthetic-data generator and the with/without sigma_d model comparison.
//
// A scenario fixes per-station pilot quantiles q(k | s, t) at k = 0.25, 0.5,
// 0.75 and a target seasonal sd profile. One replicate draws X_t ~ N(0, 1),
// maps it through the piecewise-Gaussian quantile built from the pilot
// quantiles (y*), then rescales each day-of-year so its across-year sd
// matches the target profile.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stqr/data.hpp"
#include "stqr/error.hpp"
#include "stqr/mcmc.hpp"
#include "stqr/normal.hpp"
#include "stqr/quantile_basis.hpp"
#include "stqr/spatial_gp.hpp"
#include "stqr/variance_model.hpp"

namespace stqr {

inline constexpr std::array<double, 3> kPilotLevels{0.25, 0.5, 0.75};

struct SimScenario {
  std::vector<StationMeta> stations;
  int start_year = 2000;
  int years = 5;
  std::vector<Eigen::MatrixXd> pilot_quantiles;  // per station: cells x 3
  std::vector<Eigen::VectorXd> target_sigma;     // per station: 365 day-of-year sds
  int replicates = 20;
  std::uint64_t seed = 1;

  Eigen::Index cells() const { return static_cast<Eigen::Index>(years) * kDaysPerYear; }

  void validate() const {
    if (stations.empty()) throw DomainError("scenario has no stations");
    if (years < 2) throw DomainError("the variance correction needs at least two years");
    if (replicates < 1) throw DomainError("at least one replicate is required");
    if (pilot_quantiles.size() != stations.size() || target_sigma.size() != stations.size())
      throw DomainError("one pilot surface and one sigma profile per station are required");
    for (std::size_t s = 0; s < stations.size(); ++s) {
      const auto& q = pilot_quantiles[s];
      if (q.rows() != cells() || q.cols() != 3) throw DomainError("pilot surface has the wrong shape");
      if (!((q.col(1).array() > q.col(0).array()).all() && (q.col(2).array() > q.col(1).array()).all()))
        throw DomainError("pilot quantiles of station " + stations[s].station_id + " are not increasing in the level");
      if (target_sigma[s].size() != kDaysPerYear || !(target_sigma[s].array() > 0.0).all())
        throw DomainError("target sigma of station " + stations[s].station_id + " must be 365 positive values");
    }
  }
};

// Generator pieces from three pilot quantiles: interior scales from the
// quantile spacing, outer pieces inherit the adjacent interior scale.
inline PiecewiseQuantile generator_pieces(double q25, double q50, double q75, const KnotGrid& grid) {
  if (grid.pieces() != 4) throw DomainError("the generator uses four pieces");
  Eigen::VectorXd sigma(4);
  sigma(1) = (q50 - q25) / (grid.z(2) - grid.z(1));
  sigma(2) = (q75 - q50) / (grid.z(3) - grid.z(2));
  sigma(0) = sigma(1);
  sigma(3) = sigma(2);
  return piecewise_from(q50, sigma, grid);
}

// Step 2: y* = X sigma_l + a_l on the piece with z_l <= X < z_{l+1}.
inline double generator_step(const PiecewiseQuantile& pq, const KnotGrid& grid, double x) {
  const int l = grid.piece_of_score(x);
  return x * pq.sigma(l) + pq.a(l);
}

// Step 3 on a complete years x 365 matrix: standardize each day across
// years and rescale to the target sd. Returns mean_d(target_d / sd_d).
inline double variance_correct(Eigen::MatrixXd& y, const Eigen::VectorXd& target_sigma) {
  if (y.rows() < 2) throw DomainError("the variance correction needs at least two years");
  double ratio = 0.0;
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    auto col = y.col(d);
    const double m = col.mean();
    const double sd = std::sqrt((col.array() - m).square().sum() / static_cast<double>(y.rows() - 1));
    if (!(sd > 0.0)) throw DomainError("day " + std::to_string(d + 1) + " has zero sample sd");
    col = ((col.array() - m) / sd * target_sigma(d) + m).matrix();
    ratio += target_sigma(d) / sd;
  }
  return ratio / static_cast<double>(y.cols());
}

struct GeneratedSeries {
  StationSeries series;
  Eigen::MatrixXd y_star;  // years x 365, before the variance correction
  double trend_factor = 1.0;  // mean_d(target_d / sd_d)
};

inline std::mt19937_64 unit_rng(std::uint64_t seed, std::size_t station, int replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(station), static_cast<std::uint32_t>(replicate)};
  return std::mt19937_64(seq);
}

inline GeneratedSeries generate_series(const SimScenario& sc, std::size_t station, int replicate) {
  if (station >= sc.stations.size()) throw DomainError("station index out of range");
  if (sc.years < 2) throw DomainError("the variance correction needs at least two years");
  const KnotGrid grid(4);
  auto rng = unit_rng(sc.seed, station, replicate);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto& q = sc.pilot_quantiles[station];
  GeneratedSeries g;
  g.y_star.resize(sc.years, kDaysPerYear);
  for (int i = 0; i < sc.years; ++i)
    for (int d = 1; d <= kDaysPerYear; ++d) {
      const Eigen::Index c = static_cast<Eigen::Index>(i) * kDaysPerYear + d - 1;
      const auto pq = generator_pieces(q(c, 0), q(c, 1), q(c, 2), grid);
      g.y_star(i, d - 1) = generator_step(pq, grid, z(rng));
    }
  Eigen::MatrixXd y = g.y_star;
  g.trend_factor = variance_correct(y, sc.target_sigma[station]);
  g.series = StationSeries::empty(sc.stations[station], Variable::Dmx, {sc.start_year, sc.start_year + sc.years - 1});
  for (int i = 0; i < sc.years; ++i)
    for (int d = 1; d <= kDaysPerYear; ++d) g.series.set(i, d, y(i, d - 1));
  return g;
}

// Pilot quantiles at the three generator levels for every cell of a window,
// from fixed coefficients (no extra covariates).
inline Eigen::MatrixXd pilot_from_coeffs(const QuantileCoeffs& c, const KnotGrid& grid, int years,
                                         const Eigen::VectorXd* sigma_d = nullptr) {
  if (c.layout.n_cov() != 0) throw DomainError("pilot surfaces support no extra covariates");
  const Eigen::Index n = static_cast<Eigen::Index>(years) * kDaysPerYear;
  Eigen::MatrixXd q(n, 3);
  std::array<Eigen::VectorXd, 3> B;
  for (std::size_t m = 0; m < 3; ++m) B[m] = basis_eval(kPilotLevels[m], grid);
  for (Eigen::Index cell = 0; cell < n; ++cell) {
    const int d = static_cast<int>(cell % kDaysPerYear) + 1;
    const CovariatePoint p{normalized_time(cell + 1, n), d, {}, sigma_d ? (*sigma_d)(d - 1) : 1.0};
    const Eigen::VectorXd sig = c.scales_at(p);
    detail::require_positive(sig);
    const double mu = c.mean_at(p);
    for (std::size_t m = 0; m < 3; ++m) q(cell, static_cast<Eigen::Index>(m)) = mu + B[m].dot(sig);
  }
  return q;
}

// Slope in normalized time of each pilot column with day-of-year fixed
// effects; exact for surfaces additive in t and d.
inline std::array<double, 3> pilot_trend(const Eigen::MatrixXd& q) {
  const Eigen::Index n = q.rows();
  const Eigen::Index years = n / kDaysPerYear;
  std::array<double, 3> out{};
  for (Eigen::Index m = 0; m < 3; ++m) {
    double sxy = 0.0, sxx = 0.0;
    for (int d = 0; d < kDaysPerYear; ++d) {
      double tm = 0.0, qm = 0.0;
      for (Eigen::Index i = 0; i < years; ++i) {
        const Eigen::Index c = i * kDaysPerYear + d;
        tm += normalized_time(c + 1, n);
        qm += q(c, m);
      }
      tm /= static_cast<double>(years);
      qm /= static_cast<double>(years);
      for (Eigen::Index i = 0; i < years; ++i) {
        const Eigen::Index c = i * kDaysPerYear + d;
        const double dt = normalized_time(c + 1, n) - tm;
        sxy += dt * (q(c, m) - qm);
        sxx += dt * dt;
      }
    }
    out[static_cast<std::size_t>(m)] = sxy / sxx;
  }
  return out;
}

// Short chain on fit-ready data; returns each station's pilot surface at the
// posterior-mean coefficients (the posterior mean of q, which is linear in
// the coefficients).
inline std::vector<Eigen::MatrixXd> pilot_run(const FitData& data, const ChainConfig& cfg,
                                              const std::vector<Eigen::VectorXd>& sigma_d = {}) {
  if (data.layout.n_cov() != 0) throw DomainError("pilot runs support no extra covariates");
  const auto res = run_chain(cfg, data, {0.5});
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t s = 0; s < data.stations.size(); ++s) {
    QuantileCoeffs mean(data.layout, data.grid.pieces());
    for (const auto& p : res.samples) {
      mean.beta += p.beta[s];
      mean.theta += p.theta[s];
    }
    mean.beta /= static_cast<double>(res.samples.size());
    mean.theta /= static_cast<double>(res.samples.size());
    out.push_back(pilot_from_coeffs(mean, data.grid, data.years, sigma_d.empty() ? nullptr : &sigma_d[s]));
  }
  return out;
}

struct SyntheticScenarioOptions {
  int stations = 10;
  int years = 5;
  int start_year = 2000;
  int replicates = 20;
  double log_noise_sd = 0.25;  // noise on the synthetic sample-variance profile
};

// Pilot coefficients of one synthetic station in the full form (k = 4).
inline QuantileCoeffs synthetic_pilot_coeffs(std::mt19937_64& rng) {
  CoefficientLayout lay;
  lay.form = ModelForm::Full;
  QuantileCoeffs c(lay, 4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int fs = 2;  // first Fourier slot
  c.beta(0) = 18.0 + 10.0 * U(rng);
  c.beta(1) = 0.2 + 0.8 * U(rng);
  c.beta(fs + 0) = -1.0 + 2.0 * U(rng);  // sin1
  c.beta(fs + 4) = 4.0 + 3.0 * U(rng);   // cos1
  c.beta(fs + 5) = -0.5 + U(rng);        // cos2
  const double base = 2.0 + U(rng);
  for (int l = 0; l < 4; ++l) {
    c.theta(l, 0) = base * (0.8 + 0.4 * U(rng));
    c.theta(l, 1) = -0.3 + 0.6 * U(rng);
    c.theta(l, fs + 4) = 0.3 * c.theta(l, 0) * U(rng);
  }
  return c;
}

// Scenario with synthetic pilot coefficients and a target sd profile drawn
// from the seasonal variance model and refitted.
inline SimScenario make_synthetic_scenario(const SyntheticScenarioOptions& opt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> Z(0.0, 1.0);
  SimScenario sc;
  sc.start_year = opt.start_year;
  sc.years = opt.years;
  sc.replicates = opt.replicates;
  sc.seed = seed;
  const KnotGrid grid(4);
  for (int s = 0; s < opt.stations; ++s) {
    StationMeta m;
    m.station_id = "SIM" + std::to_string(s + 1);
    m.lat = -38.0 + 26.0 * U(rng);
    m.lon = 115.0 + 38.0 * U(rng);
    sc.stations.push_back(m);
    const auto coeffs = synthetic_pilot_coeffs(rng);
    sc.pilot_quantiles.push_back(pilot_from_coeffs(coeffs, grid, opt.years));

    InterAnnualStats st;
    const Eigen::MatrixXd& q = sc.pilot_quantiles.back();
    for (int d = 1; d <= kDaysPerYear; ++d) {
      double mu = 0.0;
      for (int i = 0; i < opt.years; ++i) mu += q(static_cast<Eigen::Index>(i) * kDaysPerYear + d - 1, 1);
      st.mu_hat(d - 1) = mu / opt.years + 0.5 * Z(rng);
      st.n_obs(d - 1) = opt.years;
    }
    VarianceParams vp;
    vp.beta0 = 2.0 + 0.5 * U(rng);
    vp.beta1 = -0.06;
    vp.beta2 = 0.001;
    vp.fourier.a(0) = 0.2 * (U(rng) - 0.5);
    vp.fourier.b(0) = 0.3 + 0.3 * U(rng);
    vp.fourier.b(1) = 0.15 * (U(rng) - 0.5);
    vp.rho1 = 0.02;
    st.var_hat = simulate_variance_profile(vp, st.mu_hat, opt.log_noise_sd, rng);
    const auto fit = fit_variance_model(st);
    sc.target_sigma.push_back(predict_sigma(fit.params, st));
  }
  sc.validate();
  return sc;
}

struct ComparisonConfig {
  ChainConfig chain_no_sigma;  // full form
  ChainConfig chain_sigma;     // reduced form with sigma_d
  std::vector<double> taus{0.25, 0.5, 0.75};
  int fourier_order = kDefaultFourierOrder;
  std::function<void(int replicate)> progress;
};

struct ComparisonRow {
  std::string station;
  double tau = 0.0;
  double true_trend = 0.0;
  double trend_no_sigma = 0.0;
  double rmse_no_sigma = 0.0;
  double trend_sigma = 0.0;
  double rmse_sigma = 0.0;
  std::optional<double> ratio;  // empty when rmse_sigma is zero
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  double total_rmse_no_sigma = 0.0;
  double total_rmse_sigma = 0.0;
  int rows_sigma_wins() const {
    int n = 0;
    for (const auto& r : rows) n += r.rmse_sigma < r.rmse_no_sigma ? 1 : 0;
    return n;
  }
};

struct ReplicateEstimates {
  // [station][tau]
  std::vector<std::vector<double>> truth, no_sigma, sigma;
};

// Row statistics from per-replicate estimates.
inline ComparisonTable tabulate_comparison(const std::vector<std::string>& stations, const std::vector<double>& taus,
                                           const std::vector<ReplicateEstimates>& reps) {
  ComparisonTable t;
  const double R = static_cast<double>(reps.size());
  for (std::size_t s = 0; s < stations.size(); ++s)
    for (std::size_t k = 0; k < taus.size(); ++k) {
      ComparisonRow row;
      row.station = stations[s];
      row.tau = taus[k];
      double se0 = 0.0, se1 = 0.0;
      for (const auto& r : reps) {
        row.true_trend += r.truth[s][k] / R;
        row.trend_no_sigma += r.no_sigma[s][k] / R;
        row.trend_sigma += r.sigma[s][k] / R;
        se0 += (r.no_sigma[s][k] - r.truth[s][k]) * (r.no_sigma[s][k] - r.truth[s][k]);
        se1 += (r.sigma[s][k] - r.truth[s][k]) * (r.sigma[s][k] - r.truth[s][k]);
      }
      row.rmse_no_sigma = std::sqrt(se0 / R);
      row.rmse_sigma = std::sqrt(se1 / R);
      if (row.rmse_sigma > 0.0) row.ratio = row.rmse_no_sigma / row.rmse_sigma;
      else if (row.rmse_no_sigma == 0.0) row.ratio = 1.0;
      t.total_rmse_no_sigma += row.rmse_no_sigma;
      t.total_rmse_sigma += row.rmse_sigma;
      t.rows.push_back(std::move(row));
    }
  return t;
}

// One replicate: generate every station, fit both models, return posterior
// mean trends and the replicate's true trends.
inline ReplicateEstimates run_replicate(const SimScenario& sc, const ComparisonConfig& cfg, int replicate) {
  const KnotGrid grid(4);
  std::vector<StationSeries> series;
  std::vector<Eigen::VectorXd> sigma_d;
  ReplicateEstimates out;
  for (std::size_t s = 0; s < sc.stations.size(); ++s) {
    auto g = generate_series(sc, s, replicate);
    const auto st = interannual_stats(g.series);
    const auto vf = fit_variance_model(st);
    sigma_d.push_back(predict_sigma(vf.params, st));
    const auto tr = pilot_trend(sc.pilot_quantiles[s]);
    std::vector<double> truth;
    for (double tau : cfg.taus) {
      const auto m = std::find(kPilotLevels.begin(), kPilotLevels.end(), tau);
      if (m == kPilotLevels.end()) throw DomainError("true trends are defined at the generator levels only");
      truth.push_back(tr[static_cast<std::size_t>(m - kPilotLevels.begin())] * g.trend_factor);
    }
    out.truth.push_back(std::move(truth));
    series.push_back(std::move(g.series));
  }
  auto fit = [&](ModelForm form, ChainConfig chain) {
    CoefficientLayout lay;
    lay.form = form;
    lay.fourier_order = cfg.fourier_order;
    const auto data = build_fit_data(series, sigma_d, {}, lay, grid);
    chain.seed = chain.seed + 7919ULL * static_cast<std::uint64_t>(replicate);
    const auto res = run_chain(chain, data, cfg.taus);
    std::vector<std::vector<double>> est;
    for (const auto& st : res.summary.stations) {
      std::vector<double> e;
      for (const auto& p : st.trend) e.push_back(p.mean);
      est.push_back(std::move(e));
    }
    return est;
  };
  out.no_sigma = fit(ModelForm::Full, cfg.chain_no_sigma);
  out.sigma = fit(ModelForm::ReducedSigma, cfg.chain_sigma);
  return out;
}

inline ComparisonTable run_comparison(const SimScenario& sc, const ComparisonConfig& cfg) {
  sc.validate();
  for (double tau : cfg.taus)
    if (std::find(kPilotLevels.begin(), kPilotLevels.end(), tau) == kPilotLevels.end())
      throw DomainError("comparison levels must be among 0.25, 0.5, 0.75");
  std::vector<ReplicateEstimates> reps;
  for (int r = 0; r < sc.replicates; ++r) {
    reps.push_back(run_replicate(sc, cfg, r));
    if (cfg.progress) cfg.progress(r);
  }
  std::vector<std::string> ids;
  for (const auto& m : sc.stations) ids.push_back(m.station_id);
  return tabulate_comparison(ids, cfg.taus, reps);
}

}  // namespace stqr
