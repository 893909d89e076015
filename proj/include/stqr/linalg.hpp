#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stqr/error.hpp"

namespace stqr {

// Least squares via column-pivoted QR. Rank deficiency raises
// SingularDesignError naming the columns that fell outside the numerical rank.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const std::vector<std::string>& names = {},
                                     double threshold = 1e-10) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(threshold);
  if (qr.rank() < X.cols()) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < X.cols(); ++i) {
      const auto c = perm(i);
      if (!cols.empty()) cols += ", ";
      cols += static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)]
                                                         : "column " + std::to_string(c);
    }
    throw SingularDesignError("singular design: collinear column(s) " + cols);
  }
  return qr.solve(y);
}

inline Eigen::Index numerical_rank(const Eigen::MatrixXd& X, double threshold = 1e-10) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(threshold);
  return qr.rank();
}

}  // namespace stqr
