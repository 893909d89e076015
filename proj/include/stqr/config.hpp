#pragma once

// Flat key=value run configuration. Lines starting with '#' and trailing
// '#' comments are ignored; unknown keys are errors.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stqr/data.hpp"
#include "stqr/error.hpp"
#include "stqr/quantile_basis.hpp"

namespace stqr {

struct RunConfig {
  // data
  std::string series_dir;             // one <station_id>.csv per station
  std::vector<std::string> series;    // explicit series files (alternative to series_dir)
  std::string metadata;
  std::vector<std::pair<std::string, std::string>> covariates;  // name, path
  std::string output_dir = "out";
  YearRange window{1960, 2019};
  Variable variable = Variable::Dmx;
  double max_missing = 0.2;
  MissingBasis missing_basis = MissingBasis::StudyWindow;
  std::vector<std::string> stations;  // empty = all

  // models
  int fourier_order = kDefaultFourierOrder;
  int seasonal_fourier_order = 1;
  int pieces = kDefaultPieces;
  ModelForm model = ModelForm::ReducedSigma;
  bool scale_intercept = false;
  bool copula = true;
  int ar_order = 1;
  int acf_max_lag = 800;

  // chain
  int n_iter = 4000;
  int n_burn = 2000;
  int thin = 2;
  std::uint64_t seed = 1;
  double target_accept = 0.35;
  std::vector<double> tau{0.1, 0.5, 0.9};
  Season season = Season::All;
  bool write_samples = true;

  // simulation study
  int sim_stations = 10;
  int sim_years = 5;
  int sim_start_year = 2000;
  int sim_replicates = 20;
  int sim_n_iter = 600;
  int sim_n_burn = 300;
  int sim_thin = 1;

  int fit_fourier_order() const { return season == Season::All ? fourier_order : seasonal_fourier_order; }

  void validate() const {
    if (window.first > window.last) throw ConfigError("study_start must not exceed study_end");
    if (!(max_missing >= 0.0 && max_missing <= 1.0)) throw ConfigError("max_missing must lie in [0, 1]");
    if (fourier_order < 1 || seasonal_fourier_order < 1) throw ConfigError("Fourier orders must be positive");
    if (pieces < 1 || (pieces > 1 && pieces % 2)) throw ConfigError("pieces must be 1 or even");
    if (ar_order < 0) throw ConfigError("ar_order must be non-negative");
    if (acf_max_lag < 0) throw ConfigError("acf_max_lag must be non-negative");
    if (n_iter <= 0 || thin <= 0 || n_burn < 0 || n_burn >= n_iter)
      throw ConfigError("need n_iter > n_burn >= 0 and thin > 0");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
    if (tau.empty()) throw ConfigError("tau grid is empty");
    for (double t : tau)
      if (!(t > 0.0 && t < 1.0)) throw ConfigError("tau values must lie in (0, 1)");
    if (sim_stations < 1 || sim_years < 2 || sim_replicates < 1) throw ConfigError("invalid simulation size");
    if (sim_n_iter <= 0 || sim_thin <= 0 || sim_n_burn < 0 || sim_n_burn >= sim_n_iter)
      throw ConfigError("need sim_n_iter > sim_n_burn >= 0 and sim_thin > 0");
  }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  for (auto p : split_csv(v)) {
    if (p.empty()) throw ConfigError("empty list element in '" + std::string(v) + "'");
    out.emplace_back(p);
  }
  return out;
}

inline double to_double(const std::string& key, std::string_view v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": not a number: '" + std::string(v) + "'");
  return x;
}

inline long long to_int(const std::string& key, std::string_view v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": not an integer: '" + std::string(v) + "'");
  return x;
}

inline bool to_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + std::string(v) + "'");
}

inline std::vector<double> to_doubles(const std::string& key, std::string_view v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

}  // namespace detail

// Applies one key=value assignment; throws ConfigError on unknown keys.
inline void apply_setting(RunConfig& c, const std::string& key, std::string_view v) {
  using namespace detail;
  auto i = [&] { return static_cast<int>(to_int(key, v)); };
  if (key == "series_dir") c.series_dir = v;
  else if (key == "series") c.series = split_list(v);
  else if (key == "metadata") c.metadata = v;
  else if (key == "covariates") {
    c.covariates.clear();
    for (const auto& item : split_list(v)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
        throw ConfigError("covariates entries must be NAME:PATH");
      c.covariates.emplace_back(item.substr(0, colon), item.substr(colon + 1));
    }
  } else if (key == "output_dir") c.output_dir = v;
  else if (key == "study_start") c.window.first = i();
  else if (key == "study_end") c.window.last = i();
  else if (key == "variable") {
    try {
      c.variable = parse_variable(v);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "max_missing") c.max_missing = to_double(key, v);
  else if (key == "missing_basis") {
    if (v == "window") c.missing_basis = MissingBasis::StudyWindow;
    else if (v == "span") c.missing_basis = MissingBasis::OperatingSpan;
    else throw ConfigError("missing_basis must be window or span");
  } else if (key == "stations") c.stations = split_list(v);
  else if (key == "fourier_order") c.fourier_order = i();
  else if (key == "seasonal_fourier_order") c.seasonal_fourier_order = i();
  else if (key == "pieces") c.pieces = i();
  else if (key == "model") c.model = parse_model_form(v);
  else if (key == "scale_intercept") c.scale_intercept = to_bool(key, v);
  else if (key == "copula") c.copula = to_bool(key, v);
  else if (key == "ar_order") c.ar_order = i();
  else if (key == "acf_max_lag") c.acf_max_lag = i();
  else if (key == "n_iter") c.n_iter = i();
  else if (key == "n_burn") c.n_burn = i();
  else if (key == "thin") c.thin = i();
  else if (key == "seed") {
    const auto s = to_int(key, v);
    if (s < 0) throw ConfigError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "target_accept") c.target_accept = to_double(key, v);
  else if (key == "tau") c.tau = to_doubles(key, v);
  else if (key == "season") {
    try {
      c.season = parse_season(v);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "write_samples") c.write_samples = to_bool(key, v);
  else if (key == "sim_stations") c.sim_stations = i();
  else if (key == "sim_years") c.sim_years = i();
  else if (key == "sim_start_year") c.sim_start_year = i();
  else if (key == "sim_replicates") c.sim_replicates = i();
  else if (key == "sim_n_iter") c.sim_n_iter = i();
  else if (key == "sim_n_burn") c.sim_n_burn = i();
  else if (key == "sim_thin") c.sim_thin = i();
  else throw ConfigError("unknown configuration key '" + key + "'");
}

inline RunConfig parse_config(std::istream& in, const std::string& origin = "config") {
  RunConfig c;
  std::string line;
  std::size_t n = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key=value");
    const std::string key(detail::trim(body.substr(0, eq)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
    if (auto [it, fresh] = seen.emplace(key, n); !fresh)
      throw ConfigError(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(it->second) + ")");
    try {
      apply_setting(c, key, detail::trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

}  // namespace stqr
