#pragma once

// Metropolis-within-Gibbs inference for the spatio-temporal quantile model.
//
// Every coefficient slot (beta_k, theta_{k,l}) is a GP field over stations.
// One sweep updates each station's coefficients by single-site Gaussian
// random-walk Metropolis against likelihood + GP prior, then the field
// hyperparameters, then (copula on) the latent path and psi_v, psi_w.
// Proposal scales adapt by Robbins-Monro on the log scale during burn-in
// and are frozen afterwards.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stqr/copula.hpp"
#include "stqr/data.hpp"
#include "stqr/error.hpp"
#include "stqr/linalg.hpp"
#include "stqr/normal.hpp"
#include "stqr/quantile_basis.hpp"
#include "stqr/spatial_gp.hpp"

namespace stqr {

// Observed responses of one station with their design rows.
struct StationData {
  StationMeta meta;
  Location loc;
  Eigen::VectorXd y;
  Eigen::MatrixXd mean_design;   // n x n_mean
  Eigen::MatrixXd scale_design;  // n x n_scale
  std::vector<Eigen::Index> cell;  // latent-path index of each observation
  Eigen::Index n_cells = 0;
  CovariateBox box;

  Eigen::Index n() const { return y.size(); }
};

struct FitData {
  CoefficientLayout layout;
  KnotGrid grid{kDefaultPieces};
  std::vector<StationData> stations;
  int start_year = 0;
  int years = 0;

  std::vector<Location> locations() const {
    std::vector<Location> l;
    for (const auto& s : stations) l.push_back(s.loc);
    return l;
  }
  Eigen::Index n_stations() const { return static_cast<Eigen::Index>(stations.size()); }
};

// Assembles per-station designs. sigma_d[s] holds the 365 modelled seasonal
// sds of station s (ignored by the full form); covariates are shared by all
// stations. Only days inside `season` enter the likelihood.
inline FitData build_fit_data(const std::vector<StationSeries>& series, const std::vector<Eigen::VectorXd>& sigma_d,
                              const std::vector<CovariateSeries>& covariates, CoefficientLayout layout, KnotGrid grid,
                              Season season = Season::All) {
  if (series.empty()) throw DomainError("no stations to fit");
  if (layout.form == ModelForm::ReducedSigma && sigma_d.size() != series.size())
    throw DomainError("one sigma_d profile per station is required by the reduced form");
  layout.covariates.clear();
  for (const auto& c : covariates) layout.covariates.push_back(c.name);
  FitData fd{layout, grid, {}, series.front().start_year, series.front().years()};
  const int nm = layout.n_mean(), ns = layout.n_scale();
  std::vector<double> xbuf(covariates.size());
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    if (ser.start_year != fd.start_year || ser.years() != fd.years)
      throw SchemaError("all stations must share one study window");
    for (const auto& c : covariates)
      if (c.start_year != ser.start_year || c.years() != ser.years())
        throw SchemaError("covariate '" + c.name + "' does not span the study window");
    StationData sd;
    sd.meta = ser.meta;
    sd.loc = {ser.meta.lat, ser.meta.lon};
    sd.n_cells = ser.cells();
    std::vector<Eigen::Index> cells;
    for (Eigen::Index c = 0; c < ser.cells(); ++c)
      if (ser.observed_cell(c) && in_season(static_cast<int>(c % kDaysPerYear) + 1, season)) cells.push_back(c);
    const auto n = static_cast<Eigen::Index>(cells.size());
    sd.y.resize(n);
    sd.mean_design.resize(n, nm);
    sd.scale_design.resize(n, ns);
    Eigen::VectorXd mrow(nm), srow(ns);
    auto& box = sd.box;
    box.t_min = std::numeric_limits<double>::infinity();
    box.t_max = -box.t_min;
    box.sigma_min = box.t_min;
    box.sigma_max = -box.t_min;
    box.x.assign(covariates.size(), {box.t_min, -box.t_min});
    std::vector<bool> day_seen(kDaysPerYear, false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = cells[static_cast<std::size_t>(i)];
      const int d = static_cast<int>(c % kDaysPerYear) + 1;
      for (std::size_t j = 0; j < covariates.size(); ++j) xbuf[j] = covariates[j].at_cell(c);
      CovariatePoint p{normalized_time(c + 1, ser.cells()), d, xbuf,
                       layout.form == ModelForm::ReducedSigma ? sigma_d[s](d - 1) : 1.0};
      layout.mean_row(p, std::span<double>(mrow.data(), static_cast<std::size_t>(nm)));
      layout.scale_row(p, std::span<double>(srow.data(), static_cast<std::size_t>(ns)));
      sd.mean_design.row(i) = mrow.transpose();
      sd.scale_design.row(i) = srow.transpose();
      sd.y(i) = ser.value_cell(c);
      box.t_min = std::min(box.t_min, p.t_norm);
      box.t_max = std::max(box.t_max, p.t_norm);
      box.sigma_min = std::min(box.sigma_min, p.sigma_d);
      box.sigma_max = std::max(box.sigma_max, p.sigma_d);
      for (std::size_t j = 0; j < covariates.size(); ++j) {
        box.x[j].first = std::min(box.x[j].first, xbuf[j]);
        box.x[j].second = std::max(box.x[j].second, xbuf[j]);
      }
      day_seen[static_cast<std::size_t>(d - 1)] = true;
    }
    if (n == 0) {
      box = CovariateBox{};
      box.x.assign(covariates.size(), {0.0, 0.0});
    } else {
      for (int d = 1; d <= kDaysPerYear; ++d)
        if (day_seen[static_cast<std::size_t>(d - 1)]) box.days.push_back(d);
    }
    if (layout.form == ModelForm::ReducedSigma && n > 0 && !(box.sigma_min > 0.0))
      throw DomainError("station " + ser.meta.station_id + ": sigma_d must be positive");
    sd.cell = std::move(cells);
    fd.stations.push_back(std::move(sd));
  }
  return fd;
}

struct ChainConfig {
  int n_iter = 4000;
  int n_burn = 2000;
  int thin = 2;
  std::uint64_t seed = 1;
  double target_accept = 0.35;
  bool copula = false;
  bool adapt = true;
  // Initial random-walk scale for every coefficient block; negative selects
  // data-driven scales.
  double coefficient_scale = -1.0;
  double hyper_scale = 0.3;
  double latent_scale = 1.0;
  bool update_coefficients = true;
  bool update_hyperparams = true;
  bool update_latent = true;
  GpHyperPrior hyper_prior;
  double copula_range_lo = 0.1;
  double copula_range_hi = 50.0;

  void validate() const {
    if (n_iter <= 0 || n_burn < 0 || thin <= 0) throw ConfigError("n_iter and thin must be positive, n_burn non-negative");
    if (n_burn >= n_iter) throw ConfigError("n_burn must be smaller than n_iter");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
  }
};

// Scale-field hyperparameters: one mean per piece, sill and range shared.
struct ThetaHyper {
  Eigen::VectorXd means;
  double sill = 1.0;
  double range = 1.0;
};

struct ChainState {
  std::vector<QuantileCoeffs> coeffs;   // per station
  std::vector<GPHyperParams> beta_hyper;  // per mean slot
  std::vector<ThetaHyper> theta_hyper;    // per scale slot
  bool copula_on = false;
  LatentCopula copula;
  double log_post = 0.0;
  std::mt19937_64 rng;

  Eigen::VectorXd beta_field(int j) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(coeffs.size()));
    for (std::size_t s = 0; s < coeffs.size(); ++s) v(static_cast<Eigen::Index>(s)) = coeffs[s].beta(j);
    return v;
  }
  Eigen::VectorXd theta_field(int l, int j) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(coeffs.size()));
    for (std::size_t s = 0; s < coeffs.size(); ++s) v(static_cast<Eigen::Index>(s)) = coeffs[s].theta(l, j);
    return v;
  }
};

// Evaluates the per-observation log-density. Knot quantiles are linear in
// (mu, sigma) with coefficients B_l(k_m) tabulated once.
class PieceKernel {
 public:
  static constexpr int kMaxPieces = 32;

  explicit PieceKernel(const KnotGrid& g) : L_(g.pieces()) {
    if (L_ > kMaxPieces) throw DomainError("too many pieces");
    for (int m = 0; m <= L_; ++m)
      for (int l = 0; l < L_; ++l)
        Bk_[static_cast<std::size_t>(m * L_ + l)] = (m == 0 || m == L_) ? 0.0 : basis_value(l, g.knot(m), g);
    for (int l = 0; l < L_; ++l) {
      anchor_[static_cast<std::size_t>(l)] = g.anchor(l);
      z_anchor_[static_cast<std::size_t>(l)] = g.z_anchor(l);
    }
  }

  int pieces() const { return L_; }

  // forced < 0 selects the piece from y (marginal density); otherwise the
  // given piece is used (copula-conditional density).
  double operator()(double y, double mu, const double* sig, int forced = -1) const {
    std::array<double, kMaxPieces + 1> q;
    for (int m = 1; m < L_; ++m) {
      double v = mu;
      const double* b = &Bk_[static_cast<std::size_t>(m * L_)];
      for (int l = 0; l < L_; ++l) v += b[l] * sig[l];
      q[static_cast<std::size_t>(m)] = v;
    }
    int l = forced;
    if (l < 0) {
      l = 0;
      while (l < L_ - 1 && y > q[static_cast<std::size_t>(l + 1)]) ++l;
    }
    const double s = sig[l];
    if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
    const int m = anchor_[static_cast<std::size_t>(l)];
    const double a = (m < 0 ? mu : q[static_cast<std::size_t>(m)]) - s * z_anchor_[static_cast<std::size_t>(l)];
    const double r = (y - a) / s;
    return -0.5 * r * r - std::log(s) - normal::kLogSqrt2Pi;
  }

 private:
  int L_;
  std::array<double, (kMaxPieces + 1) * kMaxPieces> Bk_{};
  std::array<int, kMaxPieces> anchor_{};
  std::array<double, kMaxPieces> z_anchor_{};
};

namespace detail {

// Log-likelihood of one station given per-observation mean and scales.
// `sig` is n x L; when override_piece >= 0 its column is replaced by
// override_col. `pieces` (copula on) forces each observation's piece.
inline double station_loglik(const PieceKernel& K, const StationData& sd, const double* mu, const Eigen::MatrixXd& sig,
                             int override_piece = -1, const double* override_col = nullptr,
                             const std::vector<int>* pieces = nullptr) {
  const int L = K.pieces();
  std::array<double, PieceKernel::kMaxPieces> sv;
  double ll = 0.0;
  const auto n = sd.n();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int l = 0; l < L; ++l) sv[static_cast<std::size_t>(l)] = sig(i, l);
    if (override_piece >= 0) sv[static_cast<std::size_t>(override_piece)] = override_col[i];
    ll += K(sd.y(i), mu[i], sv.data(), pieces ? (*pieces)[static_cast<std::size_t>(i)] : -1);
  }
  return ll;
}

}  // namespace detail

// Observed-data log-likelihood of a state: copula-conditional when the
// state's copula is on, marginal otherwise. Invalid scales give -inf.
inline double log_likelihood(const ChainState& st, const FitData& data) {
  const PieceKernel K(data.grid);
  double total = 0.0;
  for (std::size_t s = 0; s < data.stations.size(); ++s) {
    const auto& sd = data.stations[s];
    if (sd.n() == 0) continue;
    const auto& c = st.coeffs[s];
    if (!check_positive_scales(c, sd.box)) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd mu = sd.mean_design * c.beta;
    const Eigen::MatrixXd sig = sd.scale_design * c.theta.transpose();
    std::vector<int> pieces;
    if (st.copula_on) {
      pieces.resize(static_cast<std::size_t>(sd.n()));
      for (Eigen::Index i = 0; i < sd.n(); ++i)
        pieces[static_cast<std::size_t>(i)] =
            data.grid.piece_of_score(st.copula.v(static_cast<Eigen::Index>(s), sd.cell[static_cast<std::size_t>(i)]));
    }
    total += detail::station_loglik(K, sd, mu.data(), sig, -1, nullptr, st.copula_on ? &pieces : nullptr);
  }
  return total;
}

struct BlockStats {
  std::string name;
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct PosteriorSample {
  int iter = 0;
  std::vector<Eigen::VectorXd> beta;   // per station
  std::vector<Eigen::MatrixXd> theta;  // per station
  std::vector<GPHyperParams> beta_hyper;
  std::vector<ThetaHyper> theta_hyper;
  double psi_v = 0.0;
  double psi_w = 0.0;
  double log_post = 0.0;
};

class Sampler {
 public:
  Sampler(const FitData& data, ChainConfig cfg) : data_(data), cfg_(std::move(cfg)), K_(data.grid) {
    cfg_.validate();
    init_state();
    init_caches();
    state_.log_post = log_posterior_from_caches();
    if (!std::isfinite(state_.log_post))
      throw InitializationError("non-finite log-posterior at initialization: " + diagnose());
  }

  const ChainState& state() const { return state_; }
  ChainState& mutable_state() { return state_; }
  const FitData& data() const { return data_; }
  const ChainConfig& config() const { return cfg_; }

  // Re-synchronizes caches after external edits of the state.
  void reset_caches() {
    init_caches();
    state_.log_post = log_posterior_from_caches();
  }

  void sweep(bool adapt) {
    ++iteration_;
    if (cfg_.update_coefficients) update_coefficients(adapt);
    if (cfg_.update_hyperparams) update_hyperparams(adapt);
    if (state_.copula_on && cfg_.update_latent) update_latent(adapt);
    state_.log_post = log_posterior_from_caches();
  }

  void update_coefficients(bool adapt) {
    const int L = data_.grid.pieces();
    const int nm = data_.layout.n_mean(), ns = data_.layout.n_scale();
    auto& rng = state_.rng;
    for (std::size_t s = 0; s < data_.stations.size(); ++s) {
      const auto& sd = data_.stations[s];
      auto& c = state_.coeffs[s];
      const auto si = static_cast<Eigen::Index>(s);
      const std::vector<int>* pieces = state_.copula_on ? &pieces_[s] : nullptr;
      scratch_.resize(sd.n());
      for (int j = 0; j < nm; ++j) {
        auto& blk = beta_blocks_[s][static_cast<std::size_t>(j)];
        const double h = blk.scale;
        if (h == 0.0) {
          record(blk, true, adapt);
          continue;
        }
        const double delta = h * gauss_(rng);
        const auto& hyp = state_.beta_hyper[static_cast<std::size_t>(j)];
        const double dprior =
            beta_corr_[static_cast<std::size_t>(j)].logpdf_delta(state_.beta_field(j), hyp.mean, hyp.sill, si, delta);
        double ll_new = 0.0;
        if (sd.n() > 0) {
          scratch_ = mu_[s] + delta * sd.mean_design.col(j);
          ll_new = detail::station_loglik(K_, sd, scratch_.data(), sig_[s], -1, nullptr, pieces);
        }
        const bool acc = accept(ll_new - loglik_[s] + dprior);
        if (acc) {
          c.beta(j) += delta;
          if (sd.n() > 0) mu_[s].swap(scratch_);
          loglik_[s] = ll_new;
        }
        record(blk, acc, adapt);
      }
      for (int l = 0; l < L; ++l)
        for (int j = 0; j < ns; ++j) {
          auto& blk = theta_blocks_[s][static_cast<std::size_t>(l * ns + j)];
          const double h = blk.scale;
          if (h == 0.0) {
            record(blk, true, adapt);
            continue;
          }
          const double delta = h * gauss_(rng);
          c.theta(l, j) += delta;
          bool acc = false;
          if (check_row_positive(c, sd.box, l)) {
            const auto& th = state_.theta_hyper[static_cast<std::size_t>(j)];
            c.theta(l, j) -= delta;
            const double dprior = theta_corr_[static_cast<std::size_t>(j)].logpdf_delta(
                state_.theta_field(l, j), th.means(l), th.sill, si, delta);
            c.theta(l, j) += delta;
            double ll_new = 0.0;
            if (sd.n() > 0) {
              scratch_ = sig_[s].col(l) + delta * sd.scale_design.col(j);
              ll_new = detail::station_loglik(K_, sd, mu_[s].data(), sig_[s], l, scratch_.data(), pieces);
            }
            acc = accept(ll_new - loglik_[s] + dprior);
            if (acc) {
              if (sd.n() > 0) sig_[s].col(l) = scratch_;
              loglik_[s] = ll_new;
            }
          }
          if (!acc) c.theta(l, j) -= delta;
          record(blk, acc, adapt);
        }
    }
    refresh_field_priors();
  }

  void update_hyperparams(bool adapt) {
    const auto& pr = cfg_.hyper_prior;
    const int nm = data_.layout.n_mean(), ns = data_.layout.n_scale();
    const int L = data_.grid.pieces();
    const Eigen::MatrixXd& D = distances_;
    for (int j = 0; j < nm; ++j) {
      auto& hyp = state_.beta_hyper[static_cast<std::size_t>(j)];
      auto& corr = beta_corr_[static_cast<std::size_t>(j)];
      auto& blocks = beta_hyper_blocks_[static_cast<std::size_t>(j)];
      const Eigen::VectorXd x = state_.beta_field(j);
      double cur = corr.logpdf(x, hyp.mean, hyp.sill);
      {  // mean
        const double m2 = hyp.mean + blocks[0].scale * gauss_(state_.rng);
        const double prop = corr.logpdf(x, m2, hyp.sill);
        const bool acc = accept(prop - cur + pr.log_mean(m2) - pr.log_mean(hyp.mean));
        if (acc) {
          hyp.mean = m2;
          cur = prop;
        }
        record(blocks[0], acc, adapt);
      }
      {  // sill, log-scale walk
        const double s2 = hyp.sill * std::exp(blocks[1].scale * gauss_(state_.rng));
        const double prop = corr.logpdf(x, hyp.mean, s2);
        const bool acc = accept(prop - cur + pr.log_sill(s2) - pr.log_sill(hyp.sill) + std::log(s2 / hyp.sill));
        if (acc) {
          hyp.sill = s2;
          cur = prop;
        }
        record(blocks[1], acc, adapt);
      }
      {  // range, log-scale walk
        const double r2 = hyp.range * std::exp(blocks[2].scale * gauss_(state_.rng));
        bool acc = false;
        if (std::isfinite(pr.log_range(r2))) {
          GpCorrelation c2(D, r2);
          const double prop = c2.logpdf(x, hyp.mean, hyp.sill);
          acc = accept(prop - cur + pr.log_range(r2) - pr.log_range(hyp.range) + std::log(r2 / hyp.range));
          if (acc) {
            hyp.range = r2;
            corr = std::move(c2);
            cur = prop;
          }
        }
        record(blocks[2], acc, adapt);
      }
    }
    for (int j = 0; j < ns; ++j) {
      auto& th = state_.theta_hyper[static_cast<std::size_t>(j)];
      auto& corr = theta_corr_[static_cast<std::size_t>(j)];
      auto& blocks = theta_hyper_blocks_[static_cast<std::size_t>(j)];
      std::vector<Eigen::VectorXd> fields;
      for (int l = 0; l < L; ++l) fields.push_back(state_.theta_field(l, j));
      auto family = [&](const GpCorrelation& cr, double sill) {
        double v = 0.0;
        for (int l = 0; l < L; ++l) v += cr.logpdf(fields[static_cast<std::size_t>(l)], th.means(l), sill);
        return v;
      };
      for (int l = 0; l < L; ++l) {
        auto& blk = blocks[static_cast<std::size_t>(2 + l)];
        const auto& x = fields[static_cast<std::size_t>(l)];
        const double m2 = th.means(l) + blk.scale * gauss_(state_.rng);
        const double d = corr.logpdf(x, m2, th.sill) - corr.logpdf(x, th.means(l), th.sill) + pr.log_mean(m2) -
                         pr.log_mean(th.means(l));
        const bool acc = accept(d);
        if (acc) th.means(l) = m2;
        record(blk, acc, adapt);
      }
      double cur = family(corr, th.sill);
      {
        const double s2 = th.sill * std::exp(blocks[0].scale * gauss_(state_.rng));
        const double prop = family(corr, s2);
        const bool acc = accept(prop - cur + pr.log_sill(s2) - pr.log_sill(th.sill) + std::log(s2 / th.sill));
        if (acc) {
          th.sill = s2;
          cur = prop;
        }
        record(blocks[0], acc, adapt);
      }
      {
        const double r2 = th.range * std::exp(blocks[1].scale * gauss_(state_.rng));
        bool acc = false;
        if (std::isfinite(pr.log_range(r2))) {
          GpCorrelation c2(D, r2);
          const double prop = family(c2, th.sill);
          acc = accept(prop - cur + pr.log_range(r2) - pr.log_range(th.range) + std::log(r2 / th.range));
          if (acc) {
            th.range = r2;
            corr = std::move(c2);
          }
        }
        record(blocks[1], acc, adapt);
      }
    }
    if (state_.copula_on) update_copula_params(adapt);
    refresh_field_priors();
  }

  void update_latent(bool adapt) {
    if (!state_.copula_on) return;
    auto& cop = state_.copula;
    const auto S = cop.v.rows();
    const auto T = cop.v.cols();
    auto& blk = latent_block_;
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index s = 0; s < S; ++s) {
        const double h = blk.scale;
        const double delta = h * gauss_(state_.rng);
        double d = latent_log_prior_delta(cop.v, cop.psi_v, w_corr_, s, t, delta);
        const auto i = obs_of_cell_[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
        int new_piece = -1;
        double ll_old = 0.0, ll_new = 0.0;
        if (i >= 0) {
          const auto& sd = data_.stations[static_cast<std::size_t>(s)];
          const auto& sig = sig_[static_cast<std::size_t>(s)];
          std::array<double, PieceKernel::kMaxPieces> sv;
          for (int l = 0; l < K_.pieces(); ++l) sv[static_cast<std::size_t>(l)] = sig(i, l);
          const int old_piece = pieces_[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
          new_piece = data_.grid.piece_of_score(cop.v(s, t) + delta);
          if (new_piece != old_piece) {
            const double mu = mu_[static_cast<std::size_t>(s)](i);
            ll_old = K_(sd.y(i), mu, sv.data(), old_piece);
            ll_new = K_(sd.y(i), mu, sv.data(), new_piece);
            d += ll_new - ll_old;
          }
        }
        const bool acc = accept(d);
        if (acc) {
          cop.v(s, t) += delta;
          if (i >= 0) {
            pieces_[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] = new_piece;
            loglik_[static_cast<std::size_t>(s)] += ll_new - ll_old;
          }
        }
        record(blk, acc, adapt);
      }
    // Drop accumulated rounding from the incremental updates.
    for (std::size_t s = 0; s < data_.stations.size(); ++s) loglik_[s] = station_loglik(s);
    latent_prior_ = latent_log_prior(cop.v, cop.psi_v, w_corr_);
  }

  // Full recomputation from the state alone (no caches).
  double recompute_log_posterior() const {
    Sampler fresh(*this, FreshTag{});
    return fresh.log_posterior_from_caches();
  }

  std::vector<BlockStats> block_stats() const {
    std::vector<BlockStats> out;
    auto add = [&](const Block& b) { out.push_back({b.name, b.proposed, b.accepted}); };
    for (const auto& v : beta_blocks_)
      for (const auto& b : v) add(b);
    for (const auto& v : theta_blocks_)
      for (const auto& b : v) add(b);
    for (const auto& v : beta_hyper_blocks_)
      for (const auto& b : v) add(b);
    for (const auto& v : theta_hyper_blocks_)
      for (const auto& b : v) add(b);
    if (state_.copula_on) {
      add(latent_block_);
      add(psi_v_block_);
      add(psi_w_block_);
    }
    return out;
  }

  // Acceptance rate of station s's trend (time) coefficient in the mean.
  double trend_accept_rate(std::size_t s) const {
    const auto& b = beta_blocks_[s][static_cast<std::size_t>(data_.layout.mean_time_slot())];
    return b.proposed ? static_cast<double>(b.accepted) / static_cast<double>(b.proposed) : 0.0;
  }
  double beta_scale(std::size_t s, int j) const { return beta_blocks_[s][static_cast<std::size_t>(j)].scale; }
  void set_coefficient_scales(double h) {
    for (auto& v : beta_blocks_)
      for (auto& b : v) b.scale = h;
    for (auto& v : theta_blocks_)
      for (auto& b : v) b.scale = h;
  }
  void reset_counters() {
    auto clear = [](auto& vv) {
      for (auto& v : vv)
        for (auto& b : v) b.proposed = b.accepted = 0;
    };
    clear(beta_blocks_);
    clear(theta_blocks_);
    clear(beta_hyper_blocks_);
    clear(theta_hyper_blocks_);
    latent_block_.proposed = latent_block_.accepted = 0;
    psi_v_block_.proposed = psi_v_block_.accepted = 0;
    psi_w_block_.proposed = psi_w_block_.accepted = 0;
  }

  PosteriorSample snapshot(int iter) const {
    PosteriorSample p;
    p.iter = iter;
    for (const auto& c : state_.coeffs) {
      p.beta.push_back(c.beta);
      p.theta.push_back(c.theta);
    }
    p.beta_hyper = state_.beta_hyper;
    p.theta_hyper = state_.theta_hyper;
    p.psi_v = state_.copula.psi_v;
    p.psi_w = state_.copula.psi_w;
    p.log_post = state_.log_post;
    return p;
  }

 private:
  struct FreshTag {};
  struct Block {
    std::string name;
    double scale = 0.1;
    long proposed = 0;
    long accepted = 0;
    long n_adapt = 0;
  };

  Sampler(const Sampler& other, FreshTag)
      : data_(other.data_), cfg_(other.cfg_), K_(other.data_.grid), state_(other.state_) {
    init_caches();
  }

  void init_state() {
    const auto S = data_.n_stations();
    const int L = data_.grid.pieces();
    const auto& lay = data_.layout;
    state_.rng.seed(cfg_.seed);
    state_.copula_on = cfg_.copula;
    const auto& pr = cfg_.hyper_prior;
    std::vector<double> resid_sd(static_cast<std::size_t>(S), 1.0);
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto& sd = data_.stations[static_cast<std::size_t>(s)];
      QuantileCoeffs c(lay, L);
      if (sd.n() >= 2 * lay.n_mean()) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sd.mean_design);
        if (qr.rank() == lay.n_mean()) {
          c.beta = qr.solve(sd.y);
          const Eigen::VectorXd r = sd.y - sd.mean_design * c.beta;
          resid_sd[static_cast<std::size_t>(s)] = std::max(1e-3, std::sqrt(r.squaredNorm() / static_cast<double>(sd.n())));
        }
      }
      if (lay.form == ModelForm::ReducedSigma) {
        c.theta.col(lay.scale_sigma_slot()).setOnes();
      } else {
        c.theta.col(0).setConstant(resid_sd[static_cast<std::size_t>(s)]);
      }
      state_.coeffs.push_back(std::move(c));
    }
    for (int j = 0; j < lay.n_mean(); ++j) {
      GPHyperParams h;
      h.mean = state_.beta_field(j).mean();
      h.sill = pr.sill_median();
      h.range = pr.range_median();
      state_.beta_hyper.push_back(h);
    }
    for (int j = 0; j < lay.n_scale(); ++j) {
      ThetaHyper th;
      th.means.resize(L);
      for (int l = 0; l < L; ++l) th.means(l) = state_.theta_field(l, j).mean();
      th.sill = pr.sill_median();
      th.range = pr.range_median();
      state_.theta_hyper.push_back(th);
    }
    state_.copula.psi_v = 0.2;
    state_.copula.psi_w = 0.5 * (cfg_.copula_range_lo + cfg_.copula_range_hi);
    Eigen::Index T = 0;
    for (const auto& sd : data_.stations) T = std::max(T, sd.n_cells);
    if (state_.copula_on) {
      // Start each latent value at the normal score of its observation.
      state_.copula.v = Eigen::MatrixXd::Zero(S, T);
      for (Eigen::Index s = 0; s < S; ++s) {
        const auto& sd = data_.stations[static_cast<std::size_t>(s)];
        const auto& c = state_.coeffs[static_cast<std::size_t>(s)];
        for (Eigen::Index i = 0; i < sd.n(); ++i) {
          const double mu = sd.mean_design.row(i).dot(c.beta);
          const Eigen::VectorXd sig = c.theta * sd.scale_design.row(i).transpose();
          if ((sig.array() <= 0.0).any()) continue;
          const auto pq = piecewise_from(mu, sig, data_.grid);
          const int l = piece_of_value(pq, sd.y(i));
          double v = (sd.y(i) - pq.a(l)) / pq.sigma(l);
          v = std::clamp(v, data_.grid.z(l), std::nextafter(data_.grid.z(l + 1), -1e300));
          state_.copula.v(s, sd.cell[static_cast<std::size_t>(i)]) = std::clamp(v, -6.0, 6.0);
        }
      }
    }

    // Proposal scales.
    const int nm = lay.n_mean(), ns = lay.n_scale();
    const auto mean_names = lay.mean_names();
    const auto scale_names = lay.scale_names();
    beta_blocks_.assign(static_cast<std::size_t>(S), {});
    theta_blocks_.assign(static_cast<std::size_t>(S), {});
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto& sd = data_.stations[static_cast<std::size_t>(s)];
      const double sig = resid_sd[static_cast<std::size_t>(s)];
      for (int j = 0; j < nm; ++j) {
        double h = cfg_.coefficient_scale;
        if (h < 0.0) {
          const double norm = sd.n() > 0 ? sd.mean_design.col(j).norm() : 0.0;
          h = norm > 0.0 ? 2.4 * sig / norm : 1.0;
        }
        beta_blocks_[static_cast<std::size_t>(s)].push_back(
            {sd.meta.station_id + ":beta:" + mean_names[static_cast<std::size_t>(j)], h});
      }
      for (int l = 0; l < L; ++l)
        for (int j = 0; j < ns; ++j) {
          double h = cfg_.coefficient_scale;
          if (h < 0.0) {
            const double norm = sd.n() > 0 ? sd.scale_design.col(j).norm() : 0.0;
            double unit = sig;
            if (lay.form == ModelForm::ReducedSigma) unit = 1.0;  // theta_sigma multiplies sigma_d directly
            h = norm > 0.0 ? 2.4 * unit * std::sqrt(static_cast<double>(L) / 2.0) / norm *
                                 (lay.form == ModelForm::ReducedSigma ? sig : 1.0)
                           : 1.0;
          }
          theta_blocks_[static_cast<std::size_t>(s)].push_back(
              {sd.meta.station_id + ":theta" + std::to_string(l + 1) + ":" + scale_names[static_cast<std::size_t>(j)], h});
        }
    }
    beta_hyper_blocks_.clear();
    for (int j = 0; j < nm; ++j) {
      const auto& n = mean_names[static_cast<std::size_t>(j)];
      beta_hyper_blocks_.push_back({{"hyper:beta:" + n + ":mean", std::sqrt(state_.beta_hyper[static_cast<std::size_t>(j)].sill)},
                                    {"hyper:beta:" + n + ":sill", cfg_.hyper_scale},
                                    {"hyper:beta:" + n + ":range", cfg_.hyper_scale}});
    }
    theta_hyper_blocks_.clear();
    for (int j = 0; j < ns; ++j) {
      const auto& n = scale_names[static_cast<std::size_t>(j)];
      std::vector<Block> b{{"hyper:theta:" + n + ":sill", cfg_.hyper_scale}, {"hyper:theta:" + n + ":range", cfg_.hyper_scale}};
      for (int l = 0; l < L; ++l)
        b.push_back({"hyper:theta" + std::to_string(l + 1) + ":" + n + ":mean",
                     std::sqrt(state_.theta_hyper[static_cast<std::size_t>(j)].sill)});
      theta_hyper_blocks_.push_back(std::move(b));
    }
    latent_block_ = {"latent:v", cfg_.latent_scale};
    psi_v_block_ = {"copula:psi_v", 0.1};
    psi_w_block_ = {"copula:psi_w", cfg_.hyper_scale};
  }

  void init_caches() {
    const auto S = static_cast<std::size_t>(data_.n_stations());
    const auto& lay = data_.layout;
    distances_ = distance_matrix(data_.locations());
    beta_corr_.clear();
    theta_corr_.clear();
    for (int j = 0; j < lay.n_mean(); ++j)
      beta_corr_.emplace_back(distances_, state_.beta_hyper[static_cast<std::size_t>(j)].range);
    for (int j = 0; j < lay.n_scale(); ++j)
      theta_corr_.emplace_back(distances_, state_.theta_hyper[static_cast<std::size_t>(j)].range);
    mu_.assign(S, {});
    sig_.assign(S, {});
    pieces_.assign(S, {});
    loglik_.assign(S, 0.0);
    obs_of_cell_.assign(S, {});
    if (state_.copula_on) w_corr_ = GpCorrelation(distances_, state_.copula.psi_w);
    for (std::size_t s = 0; s < S; ++s) {
      const auto& sd = data_.stations[s];
      const auto& c = state_.coeffs[s];
      mu_[s] = sd.mean_design * c.beta;
      sig_[s] = sd.scale_design * c.theta.transpose();
      if (state_.copula_on) {
        pieces_[s].resize(static_cast<std::size_t>(sd.n()));
        obs_of_cell_[s].assign(static_cast<std::size_t>(state_.copula.v.cols()), -1);
        for (Eigen::Index i = 0; i < sd.n(); ++i) {
          const auto cell = sd.cell[static_cast<std::size_t>(i)];
          pieces_[s][static_cast<std::size_t>(i)] =
              data_.grid.piece_of_score(state_.copula.v(static_cast<Eigen::Index>(s), cell));
          obs_of_cell_[s][static_cast<std::size_t>(cell)] = i;
        }
      }
      loglik_[s] = check_positive_scales(c, sd.box) ? station_loglik(s) : -std::numeric_limits<double>::infinity();
    }
    refresh_field_priors();
    latent_prior_ = state_.copula_on ? latent_log_prior(state_.copula.v, state_.copula.psi_v, w_corr_) : 0.0;
  }

  double station_loglik(std::size_t s) const {
    const auto& sd = data_.stations[s];
    if (sd.n() == 0) return 0.0;
    return detail::station_loglik(K_, sd, mu_[s].data(), sig_[s], -1, nullptr,
                                  state_.copula_on ? &pieces_[s] : nullptr);
  }

  void refresh_field_priors() {
    const auto& pr = cfg_.hyper_prior;
    field_prior_ = 0.0;
    for (std::size_t j = 0; j < state_.beta_hyper.size(); ++j) {
      const auto& h = state_.beta_hyper[j];
      field_prior_ += beta_corr_[j].logpdf(state_.beta_field(static_cast<int>(j)), h.mean, h.sill) +
                      pr.log_mean(h.mean) + pr.log_sill(h.sill) + pr.log_range(h.range);
    }
    for (std::size_t j = 0; j < state_.theta_hyper.size(); ++j) {
      const auto& th = state_.theta_hyper[j];
      for (int l = 0; l < th.means.size(); ++l)
        field_prior_ += theta_corr_[j].logpdf(state_.theta_field(l, static_cast<int>(j)), th.means(l), th.sill) +
                        pr.log_mean(th.means(l));
      field_prior_ += pr.log_sill(th.sill) + pr.log_range(th.range);
    }
  }

  double copula_param_prior(double psi_v, double psi_w) const {
    if (!(std::abs(psi_v) < 1.0)) return -std::numeric_limits<double>::infinity();
    if (!(psi_w > cfg_.copula_range_lo && psi_w < cfg_.copula_range_hi)) return -std::numeric_limits<double>::infinity();
    return -std::log(2.0) - std::log(cfg_.copula_range_hi - cfg_.copula_range_lo);
  }

  double log_posterior_from_caches() const {
    double lp = field_prior_;
    for (double l : loglik_) lp += l;
    if (state_.copula_on) lp += latent_prior_ + copula_param_prior(state_.copula.psi_v, state_.copula.psi_w);
    return lp;
  }

  void update_copula_params(bool adapt) {
    auto& cop = state_.copula;
    {
      const double p2 = cop.psi_v + psi_v_block_.scale * gauss_(state_.rng);
      bool acc = false;
      if (std::abs(p2) < 1.0) {
        const double prop = latent_log_prior(cop.v, p2, w_corr_);
        acc = accept(prop - latent_prior_);
        if (acc) {
          cop.psi_v = p2;
          latent_prior_ = prop;
        }
      }
      record(psi_v_block_, acc, adapt);
    }
    {
      const double w2 = cop.psi_w * std::exp(psi_w_block_.scale * gauss_(state_.rng));
      bool acc = false;
      if (std::isfinite(copula_param_prior(cop.psi_v, w2))) {
        GpCorrelation c2(distances_, w2);
        const double prop = latent_log_prior(cop.v, cop.psi_v, c2);
        acc = accept(prop - latent_prior_ + std::log(w2 / cop.psi_w));
        if (acc) {
          cop.psi_w = w2;
          w_corr_ = std::move(c2);
          latent_prior_ = prop;
        }
      }
      record(psi_w_block_, acc, adapt);
    }
  }

  bool check_row_positive(const QuantileCoeffs& c, const CovariateBox& box, int l) const {
    QuantileCoeffs row;
    row.layout = c.layout;
    row.beta = c.beta;
    row.theta = c.theta.row(l);
    return check_positive_scales(row, box).ok;
  }

  bool accept(double log_ratio) {
    if (std::isnan(log_ratio)) return false;
    if (log_ratio >= 0.0) {
      (void)unif_(state_.rng);
      return true;
    }
    return std::log(unif_(state_.rng)) < log_ratio;
  }

  void record(Block& b, bool acc, bool adapt) {
    ++b.proposed;
    if (acc) ++b.accepted;
    if (adapt && cfg_.adapt && b.scale > 0.0) {
      ++b.n_adapt;
      const double gamma = std::pow(static_cast<double>(b.n_adapt), -0.6);
      b.scale *= std::exp(gamma * ((acc ? 1.0 : 0.0) - cfg_.target_accept));
    }
  }

  std::string diagnose() const {
    for (std::size_t s = 0; s < data_.stations.size(); ++s) {
      const auto chk = check_positive_scales(state_.coeffs[s], data_.stations[s].box);
      if (!chk.ok)
        return "station " + data_.stations[s].meta.station_id + " has sigma_" + std::to_string(chk.witness->piece + 1) +
               " = " + std::to_string(chk.witness->value) + " at t = " + std::to_string(chk.witness->t_norm);
      if (!std::isfinite(loglik_[s])) return "station " + data_.stations[s].meta.station_id + " has non-finite likelihood";
    }
    if (!std::isfinite(field_prior_)) return "GP prior is non-finite (check station coordinates)";
    return "latent copula prior is non-finite";
  }

  const FitData& data_;
  ChainConfig cfg_;
  PieceKernel K_;
  ChainState state_;
  long iteration_ = 0;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};

  Eigen::MatrixXd distances_;
  std::vector<GpCorrelation> beta_corr_, theta_corr_;
  GpCorrelation w_corr_;
  std::vector<Eigen::VectorXd> mu_;
  std::vector<Eigen::MatrixXd> sig_;
  std::vector<std::vector<int>> pieces_;
  std::vector<std::vector<Eigen::Index>> obs_of_cell_;
  std::vector<double> loglik_;
  double field_prior_ = 0.0;
  double latent_prior_ = 0.0;
  Eigen::VectorXd scratch_;

  std::vector<std::vector<Block>> beta_blocks_, theta_blocks_;
  std::vector<std::vector<Block>> beta_hyper_blocks_, theta_hyper_blocks_;
  Block latent_block_, psi_v_block_, psi_w_block_;
};

struct CurvePoint {
  double tau = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;  // 2.5% posterior quantile
  double hi = 0.0;  // 97.5%
};

namespace detail {
// Type-7 sample quantile of a sorted vector.
inline double sorted_quantile(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline CurvePoint summarize(double tau, std::vector<double> draws, double level = 0.95) {
  CurvePoint c;
  c.tau = tau;
  const double n = static_cast<double>(draws.size());
  double m = 0.0;
  for (double d : draws) m += d;
  m /= n;
  double ss = 0.0;
  for (double d : draws) ss += (d - m) * (d - m);
  c.mean = m;
  c.sd = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(draws.begin(), draws.end());
  c.lo = sorted_quantile(draws, 0.5 * (1.0 - level));
  c.hi = sorted_quantile(draws, 1.0 - 0.5 * (1.0 - level));
  // Rounding in the mean can leave it a hair outside a degenerate interval.
  c.mean = std::clamp(c.mean, c.lo, c.hi);
  return c;
}
}  // namespace detail

// Posterior curve of the trend function g1(tau | s) = beta_time(s) +
// sum_l B_l(tau) theta_{time,l}(s).
inline std::vector<CurvePoint> trend_summary(const std::vector<PosteriorSample>& samples, const CoefficientLayout& layout,
                                             const KnotGrid& grid, const std::vector<double>& tau_grid,
                                             std::size_t station) {
  if (tau_grid.empty()) throw DomainError("empty tau grid");
  if (samples.empty()) throw DomainError("no posterior samples");
  const int jb = layout.mean_time_slot(), jt = layout.scale_time_slot();
  std::vector<CurvePoint> out;
  for (double tau : tau_grid) {
    const Eigen::VectorXd B = basis_eval(tau, grid);
    std::vector<double> draws;
    draws.reserve(samples.size());
    for (const auto& p : samples) draws.push_back(p.beta[station](jb) + B.dot(p.theta[station].col(jt)));
    out.push_back(detail::summarize(tau, std::move(draws)));
  }
  return out;
}

// Posterior summary of q(tau | s, t) at one covariate point.
inline CurvePoint quantile_summary(const std::vector<PosteriorSample>& samples, const CoefficientLayout& layout,
                                   const KnotGrid& grid, double tau, const CovariatePoint& point, std::size_t station) {
  if (samples.empty()) throw DomainError("no posterior samples");
  const Eigen::VectorXd B = basis_eval(tau, grid);
  const Eigen::VectorXd mrow = layout.mean_row(point), srow = layout.scale_row(point);
  std::vector<double> draws;
  for (const auto& p : samples) draws.push_back(p.beta[station].dot(mrow) + B.dot(p.theta[station] * srow));
  return detail::summarize(tau, std::move(draws));
}

struct StationSummary {
  std::string station_id;
  std::vector<CurvePoint> trend;  // over the tau grid
  double trend_accept_rate = 0.0;
};

struct PosteriorSummary {
  std::vector<StationSummary> stations;
  std::vector<BlockStats> blocks;  // post burn-in acceptance
};

struct ChainResult {
  std::vector<PosteriorSample> samples;
  PosteriorSummary summary;
  ChainState final_state;
};

inline ChainResult run_chain(const ChainConfig& cfg, const FitData& data, const std::vector<double>& tau_grid = {0.1, 0.5, 0.9}) {
  Sampler sampler(data, cfg);
  ChainResult res;
  for (int it = 1; it <= cfg.n_iter; ++it) {
    const bool burn = it <= cfg.n_burn;
    if (it == cfg.n_burn + 1) sampler.reset_counters();
    sampler.sweep(burn);
    if (!burn && (it - cfg.n_burn) % cfg.thin == 0) res.samples.push_back(sampler.snapshot(it));
  }
  if (res.samples.empty()) res.samples.push_back(sampler.snapshot(cfg.n_iter));
  for (std::size_t s = 0; s < data.stations.size(); ++s) {
    StationSummary ss;
    ss.station_id = data.stations[s].meta.station_id;
    ss.trend = trend_summary(res.samples, data.layout, data.grid, tau_grid, s);
    ss.trend_accept_rate = sampler.trend_accept_rate(s);
    res.summary.stations.push_back(std::move(ss));
  }
  res.summary.blocks = sampler.block_stats();
  res.final_state = sampler.state();
  return res;
}

}  // namespace stqr
