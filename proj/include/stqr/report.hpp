#pragma once

// Trend reporting: per-decade conversion, per-station trend tables and the
// selection of stations whose trend curves are shown.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stqr/data.hpp"
#include "stqr/error.hpp"

namespace stqr {

inline constexpr double kCurveThreshold = 0.3;  // degrees C per decade

// Trend on [0, 1]-normalized time over `years` study years, per decade.
inline double per_decade(double trend_on_unit_time, int years) {
  if (years <= 0) throw DomainError("study length must be positive");
  return trend_on_unit_time * 10.0 / years;
}

inline double from_per_decade(double per_decade_trend, int years) {
  if (years <= 0) throw DomainError("study length must be positive");
  return per_decade_trend * years / 10.0;
}

struct TrendRow {
  std::string station_id;
  double tau = 0.0;
  double g1_mean = 0.0;
  double g1_lo = 0.0;
  double g1_hi = 0.0;
};

struct DecadeTrendRow {
  std::string station_id;
  double lat = 0.0;
  double lon = 0.0;
  double tau = 0.0;
  double mean = 0.0;  // per decade
  double lo = 0.0;
  double hi = 0.0;
};

inline std::vector<DecadeTrendRow> decade_table(const std::vector<TrendRow>& rows,
                                                const std::map<std::string, StationMeta>& meta, int years) {
  std::vector<DecadeTrendRow> out;
  for (const auto& r : rows) {
    const auto it = meta.find(r.station_id);
    if (it == meta.end()) throw SchemaError("trend row for unknown station '" + r.station_id + "'");
    out.push_back({r.station_id, it->second.lat, it->second.lon, r.tau, per_decade(r.g1_mean, years),
                   per_decade(r.g1_lo, years), per_decade(r.g1_hi, years)});
  }
  return out;
}

// Stations with any posterior-mean trend above the threshold, in first-seen
// order.
inline std::vector<std::string> select_curve_stations(const std::vector<DecadeTrendRow>& rows,
                                                      double threshold = kCurveThreshold) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows)
    if (r.mean > threshold && seen.insert(r.station_id).second) out.push_back(r.station_id);
  return out;
}

namespace csv {

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  std::string s = os.str();
  for (int p = 6; p < 17; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  return s;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw SchemaError("missing column '" + name + "'");
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  Table t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (auto v : detail::split_csv(line)) cells.emplace_back(v);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError(path + ": expected " + std::to_string(t.header.size()) + " fields", n);
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError(path + ": empty file", 0);
  return t;
}

inline double number(const std::string& s) {
  if (s == "NA" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw ParseError("not a number: '" + s + "'", 0);
  return v;
}

}  // namespace csv

}  // namespace stqr
