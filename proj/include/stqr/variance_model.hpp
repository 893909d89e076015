#pragma once

// Inter-annual day-of-year statistics and the seasonal log-variance model
//   log s2_d = b0 + b1 m_d + b2 m_d^2 + FS4(d) + rho1 (v_{d-1} - s2_{d-1})
// where m_d, v_d are the sample mean and variance of day d across years and
// s2_d is the modelled variance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "stqr/data.hpp"
#include "stqr/error.hpp"
#include "stqr/harmonics.hpp"
#include "stqr/linalg.hpp"

namespace stqr {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kRhoBound = 0.99;

struct InterAnnualStats {
  Eigen::VectorXd mu_hat = Eigen::VectorXd::Zero(kDaysPerYear);
  Eigen::VectorXd var_hat = Eigen::VectorXd::Zero(kDaysPerYear);
  Eigen::VectorXi n_obs = Eigen::VectorXi::Zero(kDaysPerYear);

  // Day d (1..365) has at least two contributing years.
  bool defined(int d) const { return n_obs(d - 1) >= 2; }
  int n_defined() const { return static_cast<int>((n_obs.array() >= 2).count()); }
};

inline InterAnnualStats interannual_stats(const StationSeries& s) {
  if (s.years() < 2) throw DomainError("inter-annual statistics need at least two years");
  InterAnnualStats st;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int d = 1; d <= kDaysPerYear; ++d) {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < s.years(); ++i)
      if (s.observed(i, d)) {
        sum += s.value(i, d);
        ++n;
      }
    st.n_obs(d - 1) = n;
    if (n == 0) {
      st.mu_hat(d - 1) = nan;
      st.var_hat(d - 1) = nan;
      continue;
    }
    const double m = sum / n;
    double ss = 0.0;
    for (int i = 0; i < s.years(); ++i)
      if (s.observed(i, d)) ss += (s.value(i, d) - m) * (s.value(i, d) - m);
    st.mu_hat(d - 1) = m;
    st.var_hat(d - 1) = n >= 2 ? ss / (n - 1) : nan;
  }
  return st;
}

struct VarianceParams {
  double beta0 = 0.0;
  double beta1 = 0.0;  // coefficient on the day-of-year mean
  double beta2 = 0.0;  // coefficient on the squared mean
  FourierCoeffs fourier{kDefaultFourierOrder};
  double rho1 = 0.0;

  Eigen::VectorXd linear() const {
    Eigen::VectorXd v(3 + 2 * fourier.order());
    v << beta0, beta1, beta2, fourier.stacked();
    return v;
  }
  static VarianceParams from_linear(const Eigen::Ref<const Eigen::VectorXd>& v, double rho) {
    VarianceParams p;
    p.beta0 = v(0);
    p.beta1 = v(1);
    p.beta2 = v(2);
    p.fourier = FourierCoeffs::from_stacked(v.tail(v.size() - 3));
    p.rho1 = rho;
    return p;
  }
};

struct VarianceFit {
  VarianceParams params;
  double objective = 0.0;
  std::vector<double> trace;  // objective after every accepted step
  std::vector<std::string> warnings;
  bool mean_terms_dropped = false;
  bool rho_identified = true;  // false when rho1 leaves the objective flat; it is then reported as 0
  int iterations = 0;
};

namespace detail {

// Variance model on a fixed day-of-year profile. Columns: 1, m, m^2, FS(k).
class VarianceProblem {
 public:
  VarianceProblem(const InterAnnualStats& st, int k, std::vector<std::string>* warnings)
      : k_(k), mu_(st.mu_hat), vhat_(st.var_hat) {
    for (int d = 1; d <= kDaysPerYear; ++d) {
      ok_[static_cast<std::size_t>(d - 1)] = st.defined(d);
      if (ok_[static_cast<std::size_t>(d - 1)] && vhat_(d - 1) < kVarianceFloor) {
        if (warnings && !floored_)
          warnings->push_back("zero sample variance floored at 1e-6 on at least one day");
        floored_ = true;
        vhat_(d - 1) = kVarianceFloor;
      }
    }
    X_.resize(kDaysPerYear, 3 + 2 * k);
    for (int d = 1; d <= kDaysPerYear; ++d) {
      const double m = ok_[static_cast<std::size_t>(d - 1)] ? mu_(d - 1) : 0.0;
      X_(d - 1, 0) = 1.0;
      X_(d - 1, 1) = m;
      X_(d - 1, 2) = m * m;
      X_.block(d - 1, 3, 1, 2 * k) = fs_design_row(d, k).transpose();
    }
  }

  int n_cols() const { return static_cast<int>(X_.cols()); }
  bool ok(int i) const { return ok_[static_cast<std::size_t>(i)]; }
  const Eigen::MatrixXd& design() const { return X_; }
  const Eigen::VectorXd& vhat() const { return vhat_; }

  // Modelled log-variance over d = 1..365, innovation zero on day 1 and
  // after any undefined day.
  Eigen::VectorXd trajectory(const Eigen::VectorXd& beta, double rho) const {
    Eigen::VectorXd lv = X_ * beta;
    for (int i = 1; i < kDaysPerYear; ++i)
      if (ok(i - 1)) lv(i) += rho * (vhat_(i - 1) - std::exp(lv(i - 1)));
    return lv;
  }

  double objective(const Eigen::VectorXd& beta, double rho) const {
    const auto lv = trajectory(beta, rho);
    double s = 0.0;
    for (int i = 0; i < kDaysPerYear; ++i)
      if (ok(i)) s += (std::log(vhat_(i)) - lv(i)) * (std::log(vhat_(i)) - lv(i));
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  }

  // Largest |v_d - s2_d| relative to the largest v_d with rho1 = 0. When it
  // vanishes the innovation carries no information about rho1.
  double relative_innovation(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd lv = X_ * beta;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < kDaysPerYear; ++i)
      if (ok(i)) {
        num = std::max(num, std::abs(vhat_(i) - std::exp(lv(i))));
        den = std::max(den, vhat_(i));
      }
    return den > 0.0 ? num / den : 0.0;
  }

  // Residuals and Jacobian of the trajectory w.r.t. (beta[active], rho).
  void linearize(const Eigen::VectorXd& beta, double rho, const std::vector<int>& active, bool with_rho,
                 Eigen::MatrixXd& J, Eigen::VectorXd& r) const {
    const auto lv = trajectory(beta, rho);
    const auto p = static_cast<Eigen::Index>(active.size()) + (with_rho ? 1 : 0);
    Eigen::MatrixXd full(kDaysPerYear, p);
    for (int i = 0; i < kDaysPerYear; ++i) {
      for (std::size_t j = 0; j < active.size(); ++j) full(i, static_cast<Eigen::Index>(j)) = X_(i, active[j]);
      if (with_rho) full(i, p - 1) = 0.0;
      if (i > 0 && ok(i - 1)) {
        const double s2 = std::exp(lv(i - 1));
        full.row(i) -= rho * s2 * full.row(i - 1);
        if (with_rho) full(i, p - 1) += vhat_(i - 1) - s2;
      }
    }
    const int n_ok = static_cast<int>(std::count(ok_.begin(), ok_.end(), true));
    J.resize(n_ok, p);
    r.resize(n_ok);
    int row = 0;
    for (int i = 0; i < kDaysPerYear; ++i)
      if (ok(i)) {
        J.row(row) = full.row(i);
        r(row) = std::log(vhat_(i)) - lv(i);
        ++row;
      }
  }

 private:
  int k_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd vhat_;
  std::array<bool, kDaysPerYear> ok_{};
  bool floored_ = false;
  Eigen::MatrixXd X_;
};

}  // namespace detail

// Alternates a Gauss-Newton least-squares step in the linear coefficients
// (rho1 fixed) with a bounded 1-D search over rho1, accepting only
// non-increasing objective values, then polishes jointly.
inline VarianceFit fit_variance_model(const InterAnnualStats& stats, int k = kDefaultFourierOrder,
                                      int max_iterations = 500, double tolerance = 1e-10) {
  VarianceFit fit;
  detail::VarianceProblem prob(stats, k, &fit.warnings);
  const int n_def = stats.n_defined();
  if (n_def < 2 * k + 4) throw DomainError("too few well-defined days for the variance model");

  std::vector<int> active;
  {
    Eigen::MatrixXd Xd(n_def, prob.n_cols());
    int row = 0;
    for (int i = 0; i < kDaysPerYear; ++i)
      if (prob.ok(i)) Xd.row(row++) = prob.design().row(i);
    const auto rank_full = numerical_rank(Xd, 1e-9);
    std::vector<int> candidates;
    if (rank_full == Xd.cols()) {
      for (int j = 0; j < prob.n_cols(); ++j) candidates.push_back(j);
    } else {
      fit.mean_terms_dropped = true;
      fit.warnings.push_back("day-of-year mean is collinear with the harmonic terms; mean and squared-mean columns dropped");
      candidates.push_back(0);
      for (int j = 3; j < prob.n_cols(); ++j) candidates.push_back(j);
    }
    active = candidates;
  }

  const auto na = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(prob.n_cols());
  double rho = 0.0;
  auto scatter = [&](const Eigen::VectorXd& sub, Eigen::VectorXd& into) {
    for (Eigen::Index j = 0; j < na; ++j) into(active[static_cast<std::size_t>(j)]) += sub(j);
  };

  // Gauss-Newton step from the current point with step halving; returns true
  // when the objective strictly decreased.
  auto gn_step = [&](bool with_rho, double& obj) {
    Eigen::MatrixXd J;
    Eigen::VectorXd r;
    prob.linearize(beta, rho, active, with_rho, J, r);
    const Eigen::VectorXd delta = J.colPivHouseholderQr().solve(r);
    if (!delta.allFinite()) return false;
    for (double step = 1.0; step > 1e-8; step *= 0.5) {
      Eigen::VectorXd b2 = beta;
      scatter(step * delta.head(na), b2);
      double rho2 = rho;
      if (with_rho) rho2 = std::clamp(rho + step * delta(na), -kRhoBound, kRhoBound);
      const double o2 = prob.objective(b2, rho2);
      if (o2 < obj) {
        beta = b2;
        rho = rho2;
        obj = o2;
        return true;
      }
    }
    return false;
  };

  auto rho_search = [&](double& obj) {
    auto f = [&](double r) { return prob.objective(beta, r); };
    constexpr int kGrid = 199;
    double best_r = rho, best = obj, lo = f(-kRhoBound), hi = lo;
    for (int i = 0; i < kGrid; ++i) {
      const double r = -kRhoBound + 2.0 * kRhoBound * (i + 0.5) / kGrid;
      const double v = f(r);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v < best) {
        best = v;
        best_r = r;
      }
    }
    if (hi - lo <= 1e-13 * (1.0 + lo) || prob.relative_innovation(beta) < 1e-9) {
      fit.rho_identified = false;
      rho = 0.0;
      obj = f(0.0);
      return;
    }
    fit.rho_identified = true;
    const double width = 2.0 * kRhoBound / kGrid;
    const auto res = boost::math::tools::brent_find_minima(
        f, std::max(-kRhoBound, best_r - width), std::min(kRhoBound, best_r + width), 52);
    if (res.second < best) {
      best = res.second;
      best_r = res.first;
    }
    if (best < obj) {
      obj = best;
      rho = best_r;
    }
  };

  // Start from the rho1 = 0 least-squares solution.
  {
    Eigen::MatrixXd J;
    Eigen::VectorXd r;
    prob.linearize(beta, 0.0, active, false, J, r);
    scatter(J.colPivHouseholderQr().solve(r), beta);
  }
  double obj = prob.objective(beta, rho);
  fit.trace.push_back(obj);

  int it = 0;
  for (; it < max_iterations; ++it) {
    const double before = obj;
    gn_step(false, obj);
    rho_search(obj);
    fit.trace.push_back(obj);
    if (before - obj < tolerance) break;
  }
  for (int j = 0; j < 100; ++j) {
    const double before = obj;
    if (!gn_step(fit.rho_identified, obj)) break;
    fit.trace.push_back(obj);
    if (before - obj < 1e-16) break;
  }

  fit.params = VarianceParams::from_linear(beta, rho);
  fit.objective = obj;
  fit.iterations = it;
  return fit;
}

// Modelled log-variance along the fitted recursion.
inline Eigen::VectorXd predict_log_variance(const VarianceParams& params, const InterAnnualStats& stats) {
  detail::VarianceProblem prob(stats, params.fourier.order(), nullptr);
  return prob.trajectory(params.linear(), params.rho1);
}

inline Eigen::VectorXd predict_sigma(const VarianceParams& params, const InterAnnualStats& stats) {
  return (0.5 * predict_log_variance(params, stats).array()).exp().matrix();
}

// Draws a day-of-year sample-variance profile from the model: the recursion
// runs on the noisy draws, v_d = s2_d exp(noise_d).
template <class Rng>
Eigen::VectorXd simulate_variance_profile(const VarianceParams& params, const Eigen::VectorXd& mu_hat,
                                          double log_noise_sd, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const int k = params.fourier.order();
  Eigen::VectorXd v(kDaysPerYear);
  double prev_model = 0.0;
  for (int d = 1; d <= kDaysPerYear; ++d) {
    const double m = mu_hat(d - 1);
    double lv = params.beta0 + params.beta1 * m + params.beta2 * m * m +
                fs_design_row(d, k).dot(params.fourier.stacked());
    if (d > 1) lv += params.rho1 * (v(d - 2) - prev_model);
    prev_model = std::exp(lv);
    v(d - 1) = prev_model * std::exp(log_noise_sd * z(rng));
  }
  return v;
}

}  // namespace stqr
