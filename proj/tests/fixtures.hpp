#pragma once

#include <random>

#include "stqr/quantile_basis.hpp"

namespace stqr::testing {

// Covariate box shared by the random coefficient fixtures.
inline CovariateBox fixture_box() {
  CovariateBox box;
  box.t_min = 0.0;
  box.t_max = 1.0;
  box.x = {{-2.5, 2.5}};
  box.sigma_min = 1.0;
  box.sigma_max = 5.0;
  return box;
}

inline CoefficientLayout fixture_layout(ModelForm form) {
  CoefficientLayout lay;
  lay.form = form;
  lay.fourier_order = 4;
  lay.covariates = {"soi"};
  return lay;
}

// Draws coefficients until they pass check_positive_scales on fixture_box().
template <class Rng>
QuantileCoeffs random_valid_coeffs(Rng& rng, ModelForm form, const KnotGrid& grid) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.1, 2.0);
  const auto box = fixture_box();
  for (;;) {
    QuantileCoeffs c(fixture_layout(form), grid.pieces());
    for (Eigen::Index j = 0; j < c.beta.size(); ++j) c.beta(j) = (j == 0 ? 20.0 : 0.0) + 2.0 * z(rng);
    for (int l = 0; l < grid.pieces(); ++l) {
      if (form == ModelForm::ReducedSigma) {
        c.theta(l, 0) = 0.4 * z(rng);  // time
        c.theta(l, 1) = 0.1 * z(rng);  // soi
        c.theta(l, 2) = u(rng);        // sigma_d
      } else {
        c.theta(l, 0) = 2.0 + 2.0 * u(rng);
        for (Eigen::Index j = 1; j < c.theta.cols(); ++j) c.theta(l, j) = 0.3 * z(rng);
      }
    }
    if (check_positive_scales(c, box)) return c;
  }
}

// A covariate point inside fixture_box().
template <class Rng>
CovariatePoint random_point(Rng& rng, std::vector<double>& x_storage) {
  std::uniform_real_distribution<double> t(0.0, 1.0), x(-2.5, 2.5), s(1.0, 5.0);
  std::uniform_int_distribution<int> d(1, 365);
  x_storage.assign(1, x(rng));
  CovariatePoint p;
  p.t_norm = t(rng);
  p.day = d(rng);
  p.x = x_storage;
  p.sigma_d = s(rng);
  return p;
}

}  // namespace stqr::testing
