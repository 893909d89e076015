#pragma once

// Piecewise-Gaussian quantile process.
//
// With knots 0 = k_1 < ... < k_{L+1} = 1 each piece l carries a basis function
//   B_l(tau) = Phi^-1(clamp(tau, k_l, k_{l+1})) - Phi^-1(anchor_l),
// anchored at k_{l+1} for pieces below the median, at k_l for pieces above it
// and at 0.5 for the single piece of the Gaussian case L = 1. Every B_l is
// continuous and vanishes at tau = 0.5, so
//   q(tau | s, t) = mu_t(s) + sum_l B_l(tau) sigma_l(s, t)
// is continuous, increasing when all sigma_l > 0, and equals mu_t(s) at the
// median. On piece l it is a_l + sigma_l Phi^-1(tau), i.e. a Normal(a_l,
// sigma_l^2) quantile restricted to [k_l, k_{l+1}).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stqr/error.hpp"
#include "stqr/harmonics.hpp"
#include "stqr/normal.hpp"

namespace stqr {

inline constexpr int kDefaultPieces = 4;

class KnotGrid {
 public:
  explicit KnotGrid(int pieces = kDefaultPieces) : L_(pieces) {
    if (pieces < 1 || (pieces > 1 && pieces % 2 != 0))
      throw DomainError("number of pieces must be 1 or even so that 0.5 is a knot");
    kappa_.resize(static_cast<std::size_t>(L_ + 1));
    z_.resize(kappa_.size());
    for (int m = 0; m <= L_; ++m) {
      kappa_[static_cast<std::size_t>(m)] = static_cast<double>(m) / L_;
      z_[static_cast<std::size_t>(m)] = normal::quantile(kappa_[static_cast<std::size_t>(m)]);
    }
    kappa_.front() = 0.0;
    kappa_.back() = 1.0;
    for (int l = 0; l < L_; ++l) {
      const double lo = kappa_[static_cast<std::size_t>(l)], hi = kappa_[static_cast<std::size_t>(l + 1)];
      int anchor = -1;  // -1 = median
      if (hi <= 0.5 && L_ > 1) anchor = l + 1;
      else if (lo >= 0.5 && L_ > 1) anchor = l;
      anchor_.push_back(anchor);
      z_anchor_.push_back(anchor < 0 ? 0.0 : z_[static_cast<std::size_t>(anchor)]);
    }
  }

  int pieces() const { return L_; }
  // Knot m in 0..L (0-based): k_{m+1} in 1-based notation.
  double knot(int m) const { return kappa_[static_cast<std::size_t>(m)]; }
  double z(int m) const { return z_[static_cast<std::size_t>(m)]; }
  const std::vector<double>& knots() const { return kappa_; }
  int anchor(int l) const { return anchor_[static_cast<std::size_t>(l)]; }
  double z_anchor(int l) const { return z_anchor_[static_cast<std::size_t>(l)]; }

  // Piece l with k_l <= tau < k_{l+1}.
  int piece_of(double tau) const {
    int l = static_cast<int>(std::floor(tau * L_));
    l = std::clamp(l, 0, L_ - 1);
    while (l > 0 && tau < kappa_[static_cast<std::size_t>(l)]) --l;
    while (l < L_ - 1 && tau >= kappa_[static_cast<std::size_t>(l + 1)]) ++l;
    return l;
  }

  // Piece whose normal-score interval [z_l, z_{l+1}) contains v.
  int piece_of_score(double v) const {
    int l = 0;
    while (l < L_ - 1 && v >= z_[static_cast<std::size_t>(l + 1)]) ++l;
    return l;
  }

 private:
  int L_;
  std::vector<double> kappa_;
  std::vector<double> z_;
  std::vector<int> anchor_;
  std::vector<double> z_anchor_;
};

inline double basis_value(int l, double tau, const KnotGrid& grid) {
  const double c = std::clamp(tau, grid.knot(l), grid.knot(l + 1));
  return normal::quantile(c) - grid.z_anchor(l);
}

inline Eigen::VectorXd basis_eval(double tau, const KnotGrid& grid) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  Eigen::VectorXd b(grid.pieces());
  for (int l = 0; l < grid.pieces(); ++l) b(l) = basis_value(l, tau, grid);
  return b;
}

enum class ModelForm {
  Full,          // scales carry intercept, time, covariates and harmonics
  ReducedSigma,  // scales carry time, covariates and the seasonal sd sigma_d
};

inline std::string to_string(ModelForm f) { return f == ModelForm::Full ? "full" : "reduced"; }

inline ModelForm parse_model_form(std::string_view s) {
  if (s == "full") return ModelForm::Full;
  if (s == "reduced" || s == "reduced-sigma") return ModelForm::ReducedSigma;
  throw ConfigError("unknown model form '" + std::string(s) + "' (expected full or reduced)");
}

// Covariates at one (station, day): normalized time, day of year, extra
// covariates (e.g. SOI) and the modelled seasonal sd.
struct CovariatePoint {
  double t_norm = 0.0;
  int day = 1;
  std::span<const double> x{};
  double sigma_d = 1.0;
};

// Column layout of the mean (beta) and scale (theta) designs.
struct CoefficientLayout {
  ModelForm form = ModelForm::ReducedSigma;
  int fourier_order = kDefaultFourierOrder;
  std::vector<std::string> covariates;
  bool scale_intercept = false;  // reduced form only: keep theta_0 next to sigma_d

  int n_cov() const { return static_cast<int>(covariates.size()); }
  int n_mean() const { return 2 + n_cov() + 2 * fourier_order; }
  int n_scale() const {
    if (form == ModelForm::Full) return n_mean();
    return (scale_intercept ? 1 : 0) + 1 + n_cov() + 1;
  }
  int mean_time_slot() const { return 1; }
  int scale_time_slot() const { return form == ModelForm::Full ? 1 : (scale_intercept ? 1 : 0); }
  int scale_sigma_slot() const { return form == ModelForm::Full ? -1 : n_scale() - 1; }
  int scale_intercept_slot() const {
    if (form == ModelForm::Full) return 0;
    return scale_intercept ? 0 : -1;
  }

  std::vector<std::string> mean_names() const {
    std::vector<std::string> n{"intercept", "time"};
    for (const auto& c : covariates) n.push_back("x:" + c);
    for (int j = 1; j <= fourier_order; ++j) n.push_back("sin" + std::to_string(j));
    for (int j = 1; j <= fourier_order; ++j) n.push_back("cos" + std::to_string(j));
    return n;
  }
  std::vector<std::string> scale_names() const {
    if (form == ModelForm::Full) return mean_names();
    std::vector<std::string> n;
    if (scale_intercept) n.push_back("intercept");
    n.push_back("time");
    for (const auto& c : covariates) n.push_back("x:" + c);
    n.push_back("sigma_d");
    return n;
  }

  void mean_row(const CovariatePoint& p, std::span<double> out) const {
    out[0] = 1.0;
    out[1] = p.t_norm;
    for (int j = 0; j < n_cov(); ++j) out[static_cast<std::size_t>(2 + j)] = p.x[static_cast<std::size_t>(j)];
    fs_design_row(p.day, fourier_order, out.subspan(static_cast<std::size_t>(2 + n_cov())));
  }
  void scale_row(const CovariatePoint& p, std::span<double> out) const {
    if (form == ModelForm::Full) return mean_row(p, out);
    std::size_t i = 0;
    if (scale_intercept) out[i++] = 1.0;
    out[i++] = p.t_norm;
    for (int j = 0; j < n_cov(); ++j) out[i++] = p.x[static_cast<std::size_t>(j)];
    out[i] = p.sigma_d;
  }
  Eigen::VectorXd mean_row(const CovariatePoint& p) const {
    Eigen::VectorXd r(n_mean());
    mean_row(p, std::span<double>(r.data(), static_cast<std::size_t>(r.size())));
    return r;
  }
  Eigen::VectorXd scale_row(const CovariatePoint& p) const {
    Eigen::VectorXd r(n_scale());
    scale_row(p, std::span<double>(r.data(), static_cast<std::size_t>(r.size())));
    return r;
  }
};

// One station's coefficients: beta over mean slots, theta (L x scale slots).
struct QuantileCoeffs {
  CoefficientLayout layout;
  Eigen::VectorXd beta;
  Eigen::MatrixXd theta;

  QuantileCoeffs() = default;
  QuantileCoeffs(CoefficientLayout lay, int pieces)
      : layout(std::move(lay)),
        beta(Eigen::VectorXd::Zero(layout.n_mean())),
        theta(Eigen::MatrixXd::Zero(pieces, layout.n_scale())) {}

  int pieces() const { return static_cast<int>(theta.rows()); }
  double mean_at(const CovariatePoint& p) const { return beta.dot(layout.mean_row(p)); }
  Eigen::VectorXd scales_at(const CovariatePoint& p) const { return theta * layout.scale_row(p); }
  // Trend function g1(tau) = beta_time + sum_l B_l(tau) theta_{time,l}.
  double trend(double tau, const KnotGrid& grid) const {
    return beta(layout.mean_time_slot()) + basis_eval(tau, grid).dot(theta.col(layout.scale_time_slot()));
  }
};

struct PiecewiseQuantile {
  Eigen::VectorXd a;       // piece centres
  Eigen::VectorXd sigma;   // piece scales
  Eigen::VectorXd breaks;  // q at the L+1 knots; -inf and +inf at the ends
  std::vector<double> kappa;

  int pieces() const { return static_cast<int>(a.size()); }
};

namespace detail {
inline void require_positive(const Eigen::VectorXd& sigma) {
  for (Eigen::Index l = 0; l < sigma.size(); ++l)
    if (!(sigma(l) > 0.0))
      throw InvalidScaleError("non-positive scale sigma_" + std::to_string(l + 1) + " = " +
                              std::to_string(sigma(l)));
}
}  // namespace detail

inline double quantile_from(double mu, const Eigen::VectorXd& sigma, const KnotGrid& grid, double tau) {
  return mu + basis_eval(tau, grid).dot(sigma);
}

inline double quantile_eval(const QuantileCoeffs& c, const KnotGrid& grid, double tau, const CovariatePoint& p) {
  const Eigen::VectorXd sigma = c.scales_at(p);
  detail::require_positive(sigma);
  return quantile_from(c.mean_at(p), sigma, grid, tau);
}

inline PiecewiseQuantile piecewise_from(double mu, const Eigen::VectorXd& sigma, const KnotGrid& grid) {
  detail::require_positive(sigma);
  const int L = grid.pieces();
  PiecewiseQuantile pq;
  pq.sigma = sigma;
  pq.kappa = grid.knots();
  pq.breaks.resize(L + 1);
  pq.breaks(0) = -std::numeric_limits<double>::infinity();
  pq.breaks(L) = std::numeric_limits<double>::infinity();
  for (int m = 1; m < L; ++m) {
    double q = mu;
    for (int l = 0; l < L; ++l) q += basis_value(l, grid.knot(m), grid) * sigma(l);
    pq.breaks(m) = q;
  }
  pq.a.resize(L);
  for (int l = 0; l < L; ++l) {
    const int m = grid.anchor(l);
    const double q_anchor = m < 0 ? mu : pq.breaks(m);
    pq.a(l) = q_anchor - sigma(l) * grid.z_anchor(l);
  }
  return pq;
}

inline PiecewiseQuantile piecewise_params(const QuantileCoeffs& c, const KnotGrid& grid, const CovariatePoint& p) {
  return piecewise_from(c.mean_at(p), c.scales_at(p), grid);
}

// Piece l with breaks[l] < y <= breaks[l+1].
inline int piece_of_value(const PiecewiseQuantile& pq, double y) {
  int l = 0;
  while (l < pq.pieces() - 1 && y > pq.breaks(l + 1)) ++l;
  return l;
}

inline double log_density_eval(const PiecewiseQuantile& pq, double y) {
  const int l = piece_of_value(pq, y);
  return normal::logpdf(y, pq.a(l), pq.sigma(l));
}

inline double density_eval(const PiecewiseQuantile& pq, double y) { return std::exp(log_density_eval(pq, y)); }

inline int piece_of_level(const PiecewiseQuantile& pq, double u) {
  int l = 0;
  while (l < pq.pieces() - 1 && u >= pq.kappa[static_cast<std::size_t>(l + 1)]) ++l;
  return l;
}

// Quantile through the per-piece form a_l + sigma_l Phi^-1(u).
inline double sample_one(const PiecewiseQuantile& pq, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("uniform draw must lie in (0, 1)");
  const int l = piece_of_level(pq, u);
  return pq.a(l) + pq.sigma(l) * normal::quantile(u);
}

// Ranges of the covariates over which the scales must stay positive.
struct CovariateBox {
  double t_min = 0.0, t_max = 1.0;
  std::vector<std::pair<double, double>> x;  // one range per covariate
  double sigma_min = 1.0, sigma_max = 1.0;
  std::vector<int> days;                     // days entering the harmonics; empty = 1..365
};

struct ScaleWitness {
  int piece = 0;  // 0-based
  double t_norm = 0.0;
  std::vector<double> x;
  double sigma_d = 0.0;
  int day = 1;
  double value = 0.0;  // sigma_l at the witness
};

struct ScaleCheck {
  bool ok = true;
  std::optional<ScaleWitness> witness;  // first failing point when !ok
  explicit operator bool() const { return ok; }
};

// sigma_l is affine in (t, x, sigma_d) and separable from the harmonic part,
// so its minimum over the box is the sum of per-coordinate minima at the box
// vertices plus the minimum of the harmonics over the admissible days.
inline ScaleCheck check_positive_scales(const QuantileCoeffs& c, const CovariateBox& box) {
  const auto& lay = c.layout;
  ScaleCheck res;
  std::vector<int> all_days;
  const std::vector<int>* days = &box.days;
  if (box.days.empty()) {
    all_days.resize(365);
    for (int d = 1; d <= 365; ++d) all_days[static_cast<std::size_t>(d - 1)] = d;
    days = &all_days;
  }
  for (int l = 0; l < c.pieces(); ++l) {
    const auto th = c.theta.row(l);
    ScaleWitness w;
    w.piece = l;
    double v = 0.0;
    auto pick = [&](double coef, double lo, double hi, double& at) {
      at = coef >= 0.0 ? lo : hi;
      v += coef * at;
    };
    int s = 0;
    if (lay.form == ModelForm::Full || lay.scale_intercept) v += th(s++);
    pick(th(s++), box.t_min, box.t_max, w.t_norm);
    w.x.resize(static_cast<std::size_t>(lay.n_cov()));
    for (int j = 0; j < lay.n_cov(); ++j) {
      const auto& r = box.x.at(static_cast<std::size_t>(j));
      pick(th(s++), r.first, r.second, w.x[static_cast<std::size_t>(j)]);
    }
    if (lay.form == ModelForm::ReducedSigma) {
      pick(th(s), box.sigma_min, box.sigma_max, w.sigma_d);
    } else {
      const int k = lay.fourier_order;
      double best = std::numeric_limits<double>::infinity();
      Eigen::VectorXd row(2 * k);
      for (int d : *days) {
        fs_design_row(d, k, std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
        const double f = th.segment(s, 2 * k).dot(row.transpose());
        if (f < best) {
          best = f;
          w.day = d;
        }
      }
      v += best;
    }
    w.value = v;
    if (!(v > 0.0)) {
      res.ok = false;
      res.witness = w;
      return res;
    }
  }
  return res;
}

}  // namespace stqr
