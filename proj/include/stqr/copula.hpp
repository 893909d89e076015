#pragma once

// Latent AR(1) Gaussian copula for residual dependence:
//   v_1 = w_1,  v_t = psi_v v_{t-1} + sqrt(1 - psi_v^2) w_t,
// with w_t spatially correlated, cov(w_t(s), w_t(s')) = exp(-|s - s'| / psi_w).
// Each v_t(s) is marginally N(0, 1) and u_t(s) = Phi(v_t(s)) selects the
// quantile level of the observation.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "stqr/error.hpp"
#include "stqr/normal.hpp"
#include "stqr/spatial_gp.hpp"

namespace stqr {

struct LatentCopula {
  double psi_v = 0.2;
  double psi_w = 1.0;
  Eigen::MatrixXd v;  // stations x time

  bool valid() const { return std::abs(psi_v) < 1.0 && psi_w > 0.0; }
  double u(Eigen::Index s, Eigen::Index t) const { return normal::cdf(v(s, t)); }
};

template <class Rng>
Eigen::MatrixXd simulate_latent_path(double psi_v, double psi_w, const std::vector<Location>& locs, Eigen::Index T,
                                     Rng& rng) {
  if (!(std::abs(psi_v) < 1.0)) throw DomainError("|psi_v| must be below 1");
  if (!(psi_w > 0.0)) throw DomainError("psi_w must be positive");
  const auto S = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd R = (-distance_matrix(locs).array() / psi_w).exp().matrix();
  R.diagonal().array() += kRelativeNugget;
  const Eigen::MatrixXd Lw = R.llt().matrixL();
  std::normal_distribution<double> z(0.0, 1.0);
  const double c = std::sqrt(1.0 - psi_v * psi_v);
  Eigen::MatrixXd v(S, T);
  Eigen::VectorXd e(S);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) e(s) = z(rng);
    const Eigen::VectorXd w = Lw * e;
    v.col(t) = t == 0 ? w : (psi_v * v.col(t - 1) + c * w).eval();
  }
  return v;
}

// Exact log-density of a latent path under the AR(1) spatial prior.
inline double latent_log_prior(const Eigen::MatrixXd& v, double psi_v, const GpCorrelation& corr) {
  if (!(std::abs(psi_v) < 1.0)) return -std::numeric_limits<double>::infinity();
  const auto S = v.rows();
  const auto T = v.cols();
  if (T == 0) return 0.0;
  const double c = std::sqrt(1.0 - psi_v * psi_v);
  double lp = corr.logpdf(v.col(0), 0.0, 1.0);
  for (Eigen::Index t = 1; t < T; ++t) {
    const Eigen::VectorXd w = (v.col(t) - psi_v * v.col(t - 1)) / c;
    lp += corr.logpdf(w, 0.0, 1.0) - static_cast<double>(S) * std::log(c);
  }
  return lp;
}

// Change in latent_log_prior when v(s, t) moves by delta.
inline double latent_log_prior_delta(const Eigen::MatrixXd& v, double psi_v, const GpCorrelation& corr,
                                     Eigen::Index s, Eigen::Index t, double delta) {
  const double c = std::sqrt(1.0 - psi_v * psi_v);
  const auto& P = corr.precision();
  auto innovation = [&](Eigen::Index tt) -> Eigen::VectorXd {
    if (tt == 0) return v.col(0);
    return (v.col(tt) - psi_v * v.col(tt - 1)) / c;
  };
  auto term = [&](Eigen::Index tt, double dw) {
    const Eigen::VectorXd w = innovation(tt);
    return -0.5 * (2.0 * dw * P.row(s).dot(w) + dw * dw * P(s, s));
  };
  double d = term(t, t == 0 ? delta : delta / c);
  if (t + 1 < v.cols()) d += term(t + 1, -psi_v * delta / c);
  return d;
}

}  // namespace stqr
