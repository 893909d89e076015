#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "stqr/variance_model.hpp"

namespace stqr::testing {

// Smooth annual cycle plus the day-to-day sampling noise an inter-annual mean
// carries; the noise keeps mu and mu^2 out of the span of the harmonics.
inline Eigen::VectorXd seasonal_mean() {
  Eigen::VectorXd mu(kDaysPerYear);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z(0.0, 0.5);
  for (int d = 1; d <= kDaysPerYear; ++d) mu(d - 1) = 12.0 + 10.0 * std::cos(2.0 * std::numbers::pi * (d - 20) / 365.0) + z(rng);
  return mu;
}

// rho1 * s2_d stays below 1 so the recursion is contracting.
inline VarianceParams known_params() {
  VarianceParams p;
  p.beta0 = 0.5;
  p.beta1 = -0.08;
  p.beta2 = 0.003;
  p.fourier.a << 0.25, -0.15, 0.10, 0.10;
  p.fourier.b << 0.30, 0.12, -0.10, 0.10;
  p.rho1 = 0.2;
  return p;
}

inline InterAnnualStats stats_from(const Eigen::VectorXd& mu, const Eigen::VectorXd& var) {
  InterAnnualStats st;
  st.mu_hat = mu;
  st.var_hat = var;
  st.n_obs.setConstant(30);
  return st;
}

}  // namespace stqr::testing
