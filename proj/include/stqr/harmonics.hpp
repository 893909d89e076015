#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Dense>

#include "stqr/error.hpp"

namespace stqr {

inline constexpr int kDefaultFourierOrder = 4;

// Truncated Fourier series of order k with period 365:
//   sum_j a_j sin(2 pi j d / 365) + b_j cos(2 pi j d / 365).
struct FourierCoeffs {
  Eigen::VectorXd a;  // sine
  Eigen::VectorXd b;  // cosine

  FourierCoeffs() = default;
  explicit FourierCoeffs(int k) : a(Eigen::VectorXd::Zero(k)), b(Eigen::VectorXd::Zero(k)) {}
  FourierCoeffs(Eigen::VectorXd sin_part, Eigen::VectorXd cos_part)
      : a(std::move(sin_part)), b(std::move(cos_part)) {
    if (a.size() != b.size()) throw DomainError("Fourier sine/cosine parts differ in length");
  }

  int order() const { return static_cast<int>(a.size()); }

  // Stacked (a, b), matching the column order of fs_design_row.
  Eigen::VectorXd stacked() const {
    Eigen::VectorXd v(2 * order());
    v << a, b;
    return v;
  }
  static FourierCoeffs from_stacked(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const auto k = v.size() / 2;
    return {v.head(k), v.tail(k)};
  }
};

inline void check_day(int d) {
  if (d < 1 || d > 365) throw DomainError("day of year " + std::to_string(d) + " outside 1..365");
}

inline double fourier_angle(int j, int d) { return 2.0 * std::numbers::pi * j * d / 365.0; }

inline double fs_eval(int d, const FourierCoeffs& c) {
  check_day(d);
  double s = 0.0;
  for (int j = 1; j <= c.order(); ++j) {
    const double w = fourier_angle(j, d);
    s += c.a(j - 1) * std::sin(w) + c.b(j - 1) * std::cos(w);
  }
  return s;
}

// Writes (sin(w d), ..., sin(k w d), cos(w d), ..., cos(k w d)) into out[0..2k).
inline void fs_design_row(int d, int k, std::span<double> out) {
  check_day(d);
  for (int j = 1; j <= k; ++j) {
    const double w = fourier_angle(j, d);
    out[j - 1] = std::sin(w);
    out[k + j - 1] = std::cos(w);
  }
}

inline Eigen::VectorXd fs_design_row(int d, int k) {
  Eigen::VectorXd r(2 * k);
  fs_design_row(d, k, std::span<double>(r.data(), r.size()));
  return r;
}

}  // namespace stqr
