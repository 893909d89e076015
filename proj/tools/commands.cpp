#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stqr/stqr.hpp"

namespace fs = std::filesystem;

namespace stqr::cli {
namespace {

using csv::fmt;

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

std::vector<std::string> series_paths(const RunConfig& cfg) {
  std::vector<std::string> paths = cfg.series;
  if (!cfg.series_dir.empty()) {
    if (!fs::is_directory(cfg.series_dir)) throw ConfigError("series_dir is not a directory: " + cfg.series_dir);
    for (const auto& e : fs::directory_iterator(cfg.series_dir))
      if (e.is_regular_file() && e.path().extension() == ".csv") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths)
    if (!fs::is_regular_file(p)) throw ConfigError("series file not found: " + p);
  if (paths.empty()) throw ConfigError("no series files found");
  return paths;
}

void check_inputs(const RunConfig& cfg) {
  if (!cfg.metadata.empty() && !fs::is_regular_file(cfg.metadata))
    throw ConfigError("metadata file not found: " + cfg.metadata);
  for (const auto& [name, path] : cfg.covariates)
    if (!fs::is_regular_file(path)) throw ConfigError("covariate file not found: " + path);
}

std::vector<CovariateSeries> load_covariates(const RunConfig& cfg) {
  std::vector<CovariateSeries> out;
  for (const auto& [name, path] : cfg.covariates) out.push_back(load_covariate_csv(path, name, cfg.window));
  return out;
}

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.output_dir); }

// Retained stations of the manifest, reloaded with metadata attached.
std::vector<StationSeries> load_manifest(const RunConfig& cfg) {
  const auto path = out_dir(cfg) / "manifest.csv";
  if (!fs::is_regular_file(path)) throw Error("no manifest at " + path.string() + "; run ingest first");
  const auto t = csv::read(path.string());
  const int id = t.column("station_id"), file = t.column("path"), status = t.column("status");
  const int lat = t.column("lat"), lon = t.column("lon"), elev = t.column("elevation"), state = t.column("state");
  std::vector<StationSeries> out;
  std::set<std::string> wanted(cfg.stations.begin(), cfg.stations.end());
  for (const auto& r : t.rows) {
    if (r[static_cast<std::size_t>(status)] != "retained") continue;
    if (!wanted.empty() && !wanted.count(r[static_cast<std::size_t>(id)])) continue;
    auto s = load_station_csv(r[static_cast<std::size_t>(file)], cfg.variable, cfg.window);
    s.meta.lat = csv::number(r[static_cast<std::size_t>(lat)]);
    s.meta.lon = csv::number(r[static_cast<std::size_t>(lon)]);
    const double e = csv::number(r[static_cast<std::size_t>(elev)]);
    if (!std::isnan(e)) s.meta.elevation = e;
    s.meta.state = r[static_cast<std::size_t>(state)];
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error("manifest lists no retained stations");
  return out;
}

MeanModelOptions mean_options(const RunConfig& cfg) {
  MeanModelOptions o;
  o.fourier_order = cfg.fourier_order;
  o.ar_order = cfg.ar_order;
  return o;
}

}  // namespace

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.stations) cfg.stations = *o.stations;
  if (o.season) cfg.season = *o.season;
  if (o.tau) cfg.tau = *o.tau;
  if (o.max_missing) cfg.max_missing = *o.max_missing;
}

void cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  const auto paths = series_paths(cfg);
  check_inputs(cfg);
  std::map<std::string, StationMeta> meta;
  if (!cfg.metadata.empty())
    for (auto& m : load_metadata_csv(cfg.metadata)) meta[m.station_id] = m;
  std::set<std::string> wanted(cfg.stations.begin(), cfg.stations.end());

  std::vector<StationSeries> loaded;
  std::map<std::string, std::string> path_of;
  for (const auto& p : paths) {
    auto s = load_station_csv(p, cfg.variable, cfg.window);
    const auto& id = s.meta.station_id;
    if (!wanted.empty() && !wanted.count(id)) continue;
    if (path_of.count(id)) throw SchemaError("station '" + id + "' appears in two series files");
    if (const auto it = meta.find(id); it != meta.end()) s.meta = it->second;
    else log << "warning: no metadata for station " << id << "\n";
    path_of[id] = p;
    loaded.push_back(std::move(s));
  }
  std::map<std::string, double> frac;
  std::map<std::string, std::optional<YearRange>> span;
  std::map<std::string, StationMeta> meta_of;
  for (const auto& s : loaded) {
    frac[s.meta.station_id] = missing_fraction(s, cfg.missing_basis);
    span[s.meta.station_id] = observed_years(s);
    meta_of[s.meta.station_id] = s.meta;
  }
  const auto res = filter_stations(std::move(loaded), cfg.max_missing, cfg.window, cfg.missing_basis);
  std::set<std::string> kept;
  for (const auto& s : res.retained) kept.insert(s.meta.station_id);

  auto out = open_out(out_dir(cfg) / "manifest.csv");
  out << "station_id,path,lat,lon,elevation,state,first_year,last_year,missing_fraction,status\n";
  for (const auto& [id, f] : frac) {
    const auto& m = meta_of[id];
    const auto& sp = span[id];
    out << id << ',' << fs::absolute(path_of[id]).lexically_normal().string() << ',' << fmt(m.lat) << ','
        << fmt(m.lon) << ',' << opt_fmt(m.elevation) << ',' << m.state << ','
        << (sp ? std::to_string(sp->first) : "NA") << ',' << (sp ? std::to_string(sp->last) : "NA") << ','
        << fmt(f) << ',' << (kept.count(id) ? "retained" : "excluded") << '\n';
  }
  if (res.warnings) log << "warning: " << res.excluded.size() << " stations excluded, none retained\n";
  log << "ingest: " << kept.size() << " of " << frac.size() << " stations retained\n";
  if (kept.empty())
    throw Error("no station passed the filter (max_missing = " + fmt(cfg.max_missing) + ", window " +
                std::to_string(cfg.window.first) + "-" + std::to_string(cfg.window.last) + ")");
}

void cmd_explore(const RunConfig& cfg, std::ostream& log) {
  check_inputs(cfg);
  const auto stations = load_manifest(cfg);
  const auto covs = load_covariates(cfg);
  const auto dir = out_dir(cfg) / "explore";
  auto summary = open_out(dir / "summary.csv");
  summary << "station_id,status,intercept,trend,sigma,ar1,iterations,band\n";
  int failed = 0;
  for (const auto& s : stations) {
    const auto& id = s.meta.station_id;
    try {
      const auto fit = fit_mean_model(s, covs, mean_options(cfg));
      const auto rep = heterogeneity_report(fit, cfg.acf_max_lag);
      auto acf = open_out(dir / (id + "_acf.csv"));
      acf << "lag,acf_resid,acf_resid_sq\n";
      for (int h = 0; h <= cfg.acf_max_lag; ++h)
        acf << h << ',' << fmt(rep.acf_resid(h)) << ',' << fmt(rep.acf_resid_sq(h)) << '\n';
      InterAnnualStats st;
      if (s.years() >= 2) st = interannual_stats(s);
      auto doy = open_out(dir / (id + "_doy.csv"));
      doy << "d,sample_mean,sample_var,resid_mean,sample_var_resid\n";
      for (int d = 1; d <= kDaysPerYear; ++d)
        doy << d << ',' << fmt(s.years() >= 2 && st.n_obs(d - 1) > 0 ? st.mu_hat(d - 1) : NAN) << ','
            << fmt(s.years() >= 2 && st.defined(d) ? st.var_hat(d - 1) : NAN) << ',' << fmt(rep.doy_mean_resid(d - 1))
            << ',' << fmt(rep.doy_var_resid(d - 1)) << '\n';
      summary << id << ",ok," << fmt(fit.intercept) << ',' << fmt(fit.trend) << ',' << fmt(fit.sigma) << ','
              << (fit.ar_coeffs.size() ? fmt(fit.ar_coeffs(0)) : "NA") << ',' << fit.iterations << ','
              << fmt(rep.band) << '\n';
    } catch (const Error& e) {
      ++failed;
      log << "explore: station " << id << " failed: " << e.what() << "\n";
      summary << id << ",failed,NA,NA,NA,NA,NA,NA\n";
    }
  }
  log << "explore: " << stations.size() - static_cast<std::size_t>(failed) << " of " << stations.size()
      << " stations done\n";
}

namespace {

struct VarianceResult {
  InterAnnualStats stats;
  VarianceFit fit;
  Eigen::VectorXd sigma;
};

VarianceResult fit_variance(const StationSeries& s) {
  VarianceResult r;
  r.stats = interannual_stats(s);
  r.fit = fit_variance_model(r.stats);
  r.sigma = predict_sigma(r.fit.params, r.stats);
  return r;
}

void write_variance(const fs::path& dir, const std::string& id, const VarianceResult& v) {
  auto out = open_out(dir / (id + ".csv"));
  out << "d,mu_hat,var_hat,sigma_fit\n";
  for (int d = 1; d <= kDaysPerYear; ++d)
    out << d << ',' << fmt(v.stats.n_obs(d - 1) > 0 ? v.stats.mu_hat(d - 1) : NAN) << ','
        << fmt(v.stats.defined(d) ? v.stats.var_hat(d - 1) : NAN) << ',' << fmt(v.sigma(d - 1)) << '\n';
}

}  // namespace

void cmd_fit_variance(const RunConfig& cfg, std::ostream& log) {
  const auto stations = load_manifest(cfg);
  const auto dir = out_dir(cfg) / "variance";
  auto params = open_out(dir / "params.csv");
  params << "station_id,beta0,beta1,beta2";
  for (int j = 1; j <= kDefaultFourierOrder; ++j) params << ",sin" << j;
  for (int j = 1; j <= kDefaultFourierOrder; ++j) params << ",cos" << j;
  params << ",rho1,objective\n";
  for (const auto& s : stations) {
    const auto v = fit_variance(s);
    for (const auto& w : v.fit.warnings) log << "warning: station " << s.meta.station_id << ": " << w << "\n";
    write_variance(dir, s.meta.station_id, v);
    const auto& p = v.fit.params;
    params << s.meta.station_id << ',' << fmt(p.beta0) << ',' << fmt(p.beta1) << ',' << fmt(p.beta2);
    for (int j = 0; j < p.fourier.order(); ++j) params << ',' << fmt(p.fourier.a(j));
    for (int j = 0; j < p.fourier.order(); ++j) params << ',' << fmt(p.fourier.b(j));
    params << ',' << fmt(p.rho1) << ',' << fmt(v.fit.objective) << '\n';
  }
  log << "fit-variance: " << stations.size() << " stations\n";
}

namespace {
std::vector<double> curve_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 49; ++i) g.push_back(0.02 * i);
  return g;
}
}  // namespace

void cmd_fit(const RunConfig& cfg, std::ostream& log) {
  check_inputs(cfg);
  const auto stations = load_manifest(cfg);
  for (const auto& s : stations)
    if (!std::isfinite(s.meta.lat) || !std::isfinite(s.meta.lon))
      throw SchemaError("station " + s.meta.station_id + " has no coordinates; supply metadata");
  const auto covs = load_covariates(cfg);
  std::vector<Eigen::VectorXd> sigma_d;
  for (const auto& s : stations) {
    const auto v = fit_variance(s);
    write_variance(out_dir(cfg) / "variance", s.meta.station_id, v);
    sigma_d.push_back(v.sigma);
  }
  CoefficientLayout lay;
  lay.form = cfg.model;
  lay.fourier_order = cfg.fit_fourier_order();
  lay.scale_intercept = cfg.scale_intercept;
  const KnotGrid grid(cfg.pieces);
  const auto data = build_fit_data(stations, sigma_d, covs, lay, grid, cfg.season);
  ChainConfig cc;
  cc.n_iter = cfg.n_iter;
  cc.n_burn = cfg.n_burn;
  cc.thin = cfg.thin;
  cc.seed = cfg.seed;
  cc.target_accept = cfg.target_accept;
  cc.copula = cfg.copula;
  log << "fit: " << stations.size() << " stations, " << cfg.n_iter << " iterations, model "
      << to_string(cfg.model) << ", season " << to_string(cfg.season) << "\n";
  const auto res = run_chain(cc, data, cfg.tau);

  const auto dir = out_dir(cfg);
  {
    auto out = open_out(dir / "fit_stations.csv");
    out << "station_id,lat,lon,elevation,state,start_year,end_year,season,variable,model\n";
    for (const auto& s : stations)
      out << s.meta.station_id << ',' << fmt(s.meta.lat) << ',' << fmt(s.meta.lon) << ','
          << opt_fmt(s.meta.elevation) << ',' << s.meta.state << ',' << s.start_year << ',' << s.end_year << ','
          << to_string(cfg.season) << ',' << to_string(cfg.variable) << ',' << to_string(cfg.model) << '\n';
  }
  {
    auto out = open_out(dir / "posterior_summary.csv");
    out << "station_id,tau,g1_mean,g1_lo,g1_hi,accept_rate_block\n";
    for (const auto& st : res.summary.stations)
      for (const auto& p : st.trend)
        out << st.station_id << ',' << fmt(p.tau) << ',' << fmt(p.mean) << ',' << fmt(p.lo) << ',' << fmt(p.hi)
            << ',' << fmt(st.trend_accept_rate) << '\n';
  }
  {
    auto out = open_out(dir / "posterior_curves.csv");
    out << "station_id,tau,g1_mean,g1_lo,g1_hi\n";
    const auto g = curve_grid();
    for (std::size_t s = 0; s < stations.size(); ++s)
      for (const auto& p : trend_summary(res.samples, data.layout, data.grid, g, s))
        out << stations[s].meta.station_id << ',' << fmt(p.tau) << ',' << fmt(p.mean) << ',' << fmt(p.lo) << ','
            << fmt(p.hi) << '\n';
  }
  {
    auto out = open_out(dir / "acceptance.csv");
    out << "block,proposed,accepted,rate\n";
    for (const auto& b : res.summary.blocks)
      out << b.name << ',' << b.proposed << ',' << b.accepted << ',' << fmt(b.rate()) << '\n';
  }
  if (cfg.write_samples) {
    auto out = open_out(dir / "posterior_samples.csv");
    out << "iter,station_id,slot,l,value\n";
    const auto mn = data.layout.mean_names(), sn = data.layout.scale_names();
    for (const auto& p : res.samples)
      for (std::size_t s = 0; s < stations.size(); ++s) {
        const auto& id = stations[s].meta.station_id;
        for (std::size_t j = 0; j < mn.size(); ++j)
          out << p.iter << ',' << id << ",beta:" << mn[j] << ",0," << fmt(p.beta[s](static_cast<Eigen::Index>(j)))
              << '\n';
        for (Eigen::Index l = 0; l < p.theta[s].rows(); ++l)
          for (std::size_t j = 0; j < sn.size(); ++j)
            out << p.iter << ',' << id << ",theta:" << sn[j] << ',' << l + 1 << ','
                << fmt(p.theta[s](l, static_cast<Eigen::Index>(j))) << '\n';
      }
  }
  log << "fit: wrote " << res.samples.size() << " posterior samples\n";
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  SyntheticScenarioOptions so;
  so.stations = cfg.sim_stations;
  so.years = cfg.sim_years;
  so.start_year = cfg.sim_start_year;
  so.replicates = cfg.sim_replicates;
  const auto sc = make_synthetic_scenario(so, cfg.seed);
  ComparisonConfig cc;
  for (auto* c : {&cc.chain_no_sigma, &cc.chain_sigma}) {
    c->n_iter = cfg.sim_n_iter;
    c->n_burn = cfg.sim_n_burn;
    c->thin = cfg.sim_thin;
    c->seed = cfg.seed;
    c->target_accept = cfg.target_accept;
    c->copula = false;
  }
  cc.progress = [&](int r) { log << "simulate: replicate " << r + 1 << " of " << sc.replicates << " done\n"; };
  const auto table = run_comparison(sc, cc);
  auto out = open_out(out_dir(cfg) / "comparison.csv");
  out << "# trends per unit of normalized [0,1] time\n";
  out << "station,tau,true_trend,trend_no_sigma,rmse_no_sigma,trend_sigma,rmse_sigma,ratio\n";
  for (const auto& r : table.rows)
    out << r.station << ',' << fmt(r.tau) << ',' << fmt(r.true_trend) << ',' << fmt(r.trend_no_sigma) << ','
        << fmt(r.rmse_no_sigma) << ',' << fmt(r.trend_sigma) << ',' << fmt(r.rmse_sigma) << ','
        << opt_fmt(r.ratio) << '\n';
  out << "TOTAL,NA,NA,NA," << fmt(table.total_rmse_no_sigma) << ",NA," << fmt(table.total_rmse_sigma) << ','
      << (table.total_rmse_sigma > 0 ? fmt(table.total_rmse_no_sigma / table.total_rmse_sigma) : "NA") << '\n';
  log << "simulate: total RMSE without sigma " << fmt(table.total_rmse_no_sigma) << ", with sigma "
      << fmt(table.total_rmse_sigma) << "; with-sigma wins " << table.rows_sigma_wins() << " of "
      << table.rows.size() << " rows\n";
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const auto st = csv::read((dir / "fit_stations.csv").string());
  std::map<std::string, StationMeta> meta;
  std::vector<std::string> order;
  int years = 0;
  {
    const int id = st.column("station_id"), lat = st.column("lat"), lon = st.column("lon"),
              state = st.column("state"), y0 = st.column("start_year"), y1 = st.column("end_year");
    for (const auto& r : st.rows) {
      StationMeta m;
      m.station_id = r[static_cast<std::size_t>(id)];
      m.lat = csv::number(r[static_cast<std::size_t>(lat)]);
      m.lon = csv::number(r[static_cast<std::size_t>(lon)]);
      m.state = r[static_cast<std::size_t>(state)];
      const int yrs = std::stoi(r[static_cast<std::size_t>(y1)]) - std::stoi(r[static_cast<std::size_t>(y0)]) + 1;
      if (years && yrs != years) throw SchemaError("stations disagree on the study length");
      years = yrs;
      order.push_back(m.station_id);
      meta[m.station_id] = m;
    }
  }
  auto read_trends = [&](const std::string& file) {
    const auto t = csv::read((dir / file).string());
    const int id = t.column("station_id"), tau = t.column("tau"), m = t.column("g1_mean"), lo = t.column("g1_lo"),
              hi = t.column("g1_hi");
    std::vector<TrendRow> rows;
    for (const auto& r : t.rows)
      rows.push_back({r[static_cast<std::size_t>(id)], csv::number(r[static_cast<std::size_t>(tau)]),
                      csv::number(r[static_cast<std::size_t>(m)]), csv::number(r[static_cast<std::size_t>(lo)]),
                      csv::number(r[static_cast<std::size_t>(hi)])});
    return decade_table(rows, meta, years);
  };
  const auto summary = read_trends("posterior_summary.csv");
  const auto curves = read_trends("posterior_curves.csv");

  const auto rdir = dir / "report";
  {
    auto out = open_out(rdir / "trend_per_decade.csv");
    out << "station_id,lat,lon,tau,trend_mean,trend_lo,trend_hi\n";
    for (const auto& r : summary)
      out << r.station_id << ',' << fmt(r.lat) << ',' << fmt(r.lon) << ',' << fmt(r.tau) << ',' << fmt(r.mean) << ','
          << fmt(r.lo) << ',' << fmt(r.hi) << '\n';
  }
  {
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = nlohmann::ordered_json::array();
    for (const auto& id : order) {
      const auto& m = meta[id];
      nlohmann::ordered_json f;
      f["type"] = "Feature";
      f["geometry"] = {{"type", "Point"}, {"coordinates", {m.lon, m.lat}}};
      nlohmann::ordered_json props;
      props["station_id"] = id;
      props["state"] = m.state;
      props["units"] = "degC per decade";
      for (const auto& r : summary)
        if (r.station_id == id) {
          const auto key = "tau_" + fmt(r.tau);
          props["trend_" + key] = r.mean;
          props["trend_lo_" + key] = r.lo;
          props["trend_hi_" + key] = r.hi;
        }
      f["properties"] = props;
      fc["features"].push_back(f);
    }
    auto out = open_out(rdir / "trends.geojson");
    out << fc.dump(2) << '\n';
  }
  std::vector<DecadeTrendRow> all = summary;
  all.insert(all.end(), curves.begin(), curves.end());
  const auto selected = select_curve_stations(all);
  {
    auto out = open_out(rdir / "trend_curves.csv");
    out << "station_id,tau,trend_mean,trend_lo,trend_hi\n";
    const std::set<std::string> sel(selected.begin(), selected.end());
    for (const auto& r : curves)
      if (sel.count(r.station_id))
        out << r.station_id << ',' << fmt(r.tau) << ',' << fmt(r.mean) << ',' << fmt(r.lo) << ',' << fmt(r.hi)
            << '\n';
  }
  log << "report: " << order.size() << " stations, " << selected.size() << " with a trend above "
      << fmt(kCurveThreshold) << " degC/decade\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal quantile trends for daily temperature series"};
  app.require_subcommand(1, 1);
  std::string config_path;
  Overrides ov;
  std::string season, stations, tau;
  std::uint64_t seed = 0;
  double max_missing = 0.0;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "load, leap-day drop and filter station series; write manifest.csv"},
      {"explore", "mean-model fits and residual diagnostics per station"},
      {"fit-variance", "seasonal variance model per station"},
      {"fit", "variance model, then MCMC for the quantile model"},
      {"simulate", "synthetic comparison of models with and without sigma_d"},
      {"report", "per-decade trend tables, GeoJSON and trend curves"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value configuration file")->required();
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--stations", stations, "comma-separated station ids");
    sub->add_option("--season", season, "all, djf or jja")->check(CLI::IsMember({"all", "djf", "jja"}));
    sub->add_option("--tau", tau, "comma-separated quantile levels");
    sub->add_option("--max-missing", max_missing, "maximum missing fraction")->check(CLI::Range(0.0, 1.0));
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--stations")) ov.stations = detail::split_list(stations);
    if (sub->count("--season")) ov.season = parse_season(season);
    if (sub->count("--tau")) ov.tau = detail::to_doubles("--tau", tau);
    if (sub->count("--max-missing")) ov.max_missing = max_missing;
    apply_overrides(cfg, ov);
    cfg.validate();
    if (sub->get_name() == "ingest") series_paths(cfg);
    check_inputs(cfg);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const auto& name = sub->get_name();
    if (name == "ingest") cmd_ingest(cfg, err);
    else if (name == "explore") cmd_explore(cfg, err);
    else if (name == "fit-variance") cmd_fit_variance(cfg, err);
    else if (name == "fit") cmd_fit(cfg, err);
    else if (name == "simulate") cmd_simulate(cfg, err);
    else cmd_report(cfg, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace stqr::cli
