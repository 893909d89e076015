#pragma once

// Gaussian-process priors with exponential covariance
//   cov(s, s') = psi^2 exp(-|s - s'| / rho)
// over station coordinates, |.| Euclidean in (lat, lon) degrees.

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "stqr/error.hpp"
#include "stqr/normal.hpp"

namespace stqr {

struct Location {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kRelativeNugget = 1e-8;

struct GPHyperParams {
  double mean = 0.0;
  double sill = 1.0;   // psi^2
  double range = 1.0;  // rho, degrees

  bool valid() const { return sill > 0.0 && range > 0.0 && std::isfinite(mean); }
};

struct GPField {
  Eigen::VectorXd values;
  GPHyperParams hyper;
};

inline double distance(const Location& a, const Location& b) { return std::hypot(a.lat - b.lat, a.lon - b.lon); }

inline Eigen::MatrixXd distance_matrix(const std::vector<Location>& locs) {
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      D(i, j) = distance(locs[static_cast<std::size_t>(i)], locs[static_cast<std::size_t>(j)]);
  return D;
}

inline Eigen::MatrixXd exp_cov_matrix(const std::vector<Location>& locs, const GPHyperParams& h, double nugget,
                                      std::vector<std::string>* warnings = nullptr) {
  if (!h.valid()) throw DomainError("GP sill and range must be positive");
  if (nugget < 0.0) throw DomainError("nugget must be non-negative");
  const Eigen::MatrixXd D = distance_matrix(locs);
  Eigen::MatrixXd C = (h.sill * (-D.array() / h.range).exp()).matrix();
  C.diagonal().array() += nugget;
  if (warnings && nugget == 0.0) {
    for (Eigen::Index i = 0; i < D.rows(); ++i)
      for (Eigen::Index j = i + 1; j < D.cols(); ++j)
        if (D(i, j) == 0.0) {
          warnings->push_back("duplicate station locations with zero nugget: covariance is singular");
          return C;
        }
  }
  return C;
}

namespace detail {
inline Eigen::LLT<Eigen::MatrixXd> factor_or_throw(const Eigen::MatrixXd& C) {
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("covariance matrix is not positive definite");
  return llt;
}
}  // namespace detail

template <class Rng>
GPField gp_sample(const GPHyperParams& h, const std::vector<Location>& locs, Rng& rng,
                  double relative_nugget = kRelativeNugget) {
  const auto C = exp_cov_matrix(locs, h, relative_nugget * h.sill);
  const auto llt = detail::factor_or_throw(C);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd e(static_cast<Eigen::Index>(locs.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = z(rng);
  GPField f;
  f.hyper = h;
  f.values = (llt.matrixL() * e).array() + h.mean;
  return f;
}

inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& C) {
  const auto llt = detail::factor_or_throw(C);
  const Eigen::VectorXd r = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() - 0.5 * logdet - static_cast<double>(x.size()) * normal::kLogSqrt2Pi;
}

inline double gp_logpdf(const GPField& f, const std::vector<Location>& locs,
                        double relative_nugget = kRelativeNugget) {
  if (static_cast<std::size_t>(f.values.size()) != locs.size())
    throw DomainError("field length differs from the number of locations");
  const auto C = exp_cov_matrix(locs, f.hyper, relative_nugget * f.hyper.sill);
  return mvn_logpdf(f.values, Eigen::VectorXd::Constant(f.values.size(), f.hyper.mean), C);
}

// Factorized correlation R(rho) + nugget I. The sill scales it, so
// cov = sill * (R + nugget I) and sill updates reuse the factor.
class GpCorrelation {
 public:
  GpCorrelation() = default;
  GpCorrelation(const Eigen::MatrixXd& distances, double range, double relative_nugget = kRelativeNugget)
      : range_(range) {
    Eigen::MatrixXd R = (-distances.array() / range).exp().matrix();
    R.diagonal().array() += relative_nugget;
    const auto llt = detail::factor_or_throw(R);
    precision_ = llt.solve(Eigen::MatrixXd::Identity(R.rows(), R.cols()));
    logdet_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  double range() const { return range_; }
  Eigen::Index size() const { return precision_.rows(); }
  const Eigen::MatrixXd& precision() const { return precision_; }  // of R, without sill

  double logpdf(const Eigen::VectorXd& x, double mean, double sill) const {
    const Eigen::VectorXd r = x.array() - mean;
    const auto n = static_cast<double>(x.size());
    return -0.5 * r.dot(precision_ * r) / sill - 0.5 * (n * std::log(sill) + logdet_) - n * normal::kLogSqrt2Pi;
  }

  // Change in logpdf when x(i) moves by delta.
  double logpdf_delta(const Eigen::VectorXd& x, double mean, double sill, Eigen::Index i, double delta) const {
    const double qi = precision_.row(i).dot((x.array() - mean).matrix());
    return -0.5 * (2.0 * delta * qi + delta * delta * precision_(i, i)) / sill;
  }

 private:
  double range_ = 1.0;
  Eigen::MatrixXd precision_;
  double logdet_ = 0.0;
};

// Weakly informative hyperpriors: mean ~ N(0, 100^2), psi^2 ~ half-normal
// with scale 10, rho ~ Uniform(0.1, 50) degrees.
struct GpHyperPrior {
  double mean_sd = 100.0;
  double sill_scale = 10.0;
  double range_lo = 0.1;
  double range_hi = 50.0;

  double log_mean(double m) const { return normal::logpdf(m, 0.0, mean_sd); }
  double log_sill(double s) const {
    if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
    return normal::logpdf(s, 0.0, sill_scale) + std::numbers::ln2;
  }
  double log_range(double r) const {
    if (!(r > range_lo && r < range_hi)) return -std::numeric_limits<double>::infinity();
    return -std::log(range_hi - range_lo);
  }
  double sill_median() const { return sill_scale * 0.6744897501960817; }
  double range_median() const { return 0.5 * (range_lo + range_hi); }
};

}  // namespace stqr
