#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stqr/mcmc.hpp"

namespace stqr::testing {

// Stations drawn from known reduced-form coefficients with independent
// quantile levels (copula off).
struct SyntheticFixture {
  CoefficientLayout layout;
  KnotGrid grid{kDefaultPieces};
  std::vector<QuantileCoeffs> truth;
  std::vector<StationSeries> series;
  std::vector<Eigen::VectorXd> sigma_d;
  FitData data;

  double true_trend(std::size_t s, double tau) const { return truth[s].trend(tau, grid); }
};

struct SyntheticSpec {
  int stations = 3;
  int years = 5;
  int pieces = 4;
  int fourier_order = 2;
  double missing = 0.0;  // fraction of cells masked at random
  bool constant_sigma_d = false;
};

inline SyntheticFixture make_synthetic(std::uint64_t seed, const SyntheticSpec& spec = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  SyntheticFixture f;
  f.grid = KnotGrid(spec.pieces);
  f.layout.form = ModelForm::ReducedSigma;
  f.layout.fourier_order = spec.fourier_order;
  const int L = spec.pieces;
  const int cos1 = 2 + f.layout.n_cov() + spec.fourier_order;
  for (int s = 0; s < spec.stations; ++s) {
    QuantileCoeffs c(f.layout, L);
    c.beta(0) = 20.0 + s;
    c.beta(1) = 1.0 + 0.3 * s;
    c.beta(cos1) = 5.0;
    for (int l = 0; l < L; ++l) {
      c.theta(l, 0) = L > 1 ? 0.2 * (l - 0.5 * (L - 1)) / (L - 1) : 0.0;
      c.theta(l, 1) = 0.4 + 0.05 * l;
    }
    Eigen::VectorXd sd(kDaysPerYear);
    for (int d = 1; d <= kDaysPerYear; ++d)
      sd(d - 1) = spec.constant_sigma_d ? 1.0 : 1.0 + 0.3 * std::cos(2.0 * std::numbers::pi * (d + 20 * s) / kDaysPerYear);
    StationMeta m;
    m.station_id = "S" + std::to_string(s);
    m.lat = -30.0 + s;
    m.lon = 140.0 + 0.5 * s;
    auto ser = StationSeries::empty(m, Variable::Dmx, {2000, 2000 + spec.years - 1});
    for (Eigen::Index cell = 0; cell < ser.cells(); ++cell) {
      const int d = static_cast<int>(cell % kDaysPerYear) + 1;
      const CovariatePoint p{normalized_time(cell + 1, ser.cells()), d, {}, sd(d - 1)};
      const double y = sample_one(piecewise_params(c, f.grid, p), U(rng));
      if (U(rng) >= spec.missing) ser.set(static_cast<int>(cell / kDaysPerYear), d, y);
    }
    f.truth.push_back(std::move(c));
    f.series.push_back(std::move(ser));
    f.sigma_d.push_back(std::move(sd));
  }
  f.data = build_fit_data(f.series, f.sigma_d, {}, f.layout, f.grid);
  return f;
}

}  // namespace stqr::testing
