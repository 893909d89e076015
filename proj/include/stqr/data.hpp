#pragma once

// Station ingestion on a 365-day calendar: CSV loaders, leap-day removal,
// the missingness filter, and normalized time.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stqr/error.hpp"

namespace stqr {

inline constexpr int kDaysPerYear = 365;

enum class Variable { Dmx, Dmn };

inline std::string to_string(Variable v) { return v == Variable::Dmx ? "Dmx" : "Dmn"; }

inline Variable parse_variable(std::string_view s) {
  if (s == "Dmx" || s == "dmx" || s == "max") return Variable::Dmx;
  if (s == "Dmn" || s == "dmn" || s == "min") return Variable::Dmn;
  throw ConfigError("unknown variable '" + std::string(s) + "' (expected Dmx or Dmn)");
}

struct YearRange {
  int first = 1960;
  int last = 2019;
  int years() const { return last - first + 1; }
  bool operator==(const YearRange&) const = default;
};

struct CivilDate {
  int year = 0;
  int month = 0;
  int day = 0;
  auto operator<=>(const CivilDate&) const = default;
};

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int year, int month) {
  static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return month == 2 && is_leap_year(year) ? 29 : kDays[month - 1];
}

// Day of year on the 365-day calendar (Feb 29 has no slot). Mar 1 is day 60.
inline int noleap_day_of_year(int month, int day) {
  static constexpr std::array<int, 12> kCum{0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  return kCum[month - 1] + day;
}

// Inverse of noleap_day_of_year: month (1..12) for a 365-day-calendar day.
inline int month_of_day(int d) {
  static constexpr std::array<int, 12> kCum{0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  int m = 12;
  while (kCum[m - 1] >= d) --m;
  return m;
}

inline CivilDate parse_date(std::string_view s, std::size_t line = 0) {
  auto num = [&](std::string_view part) {
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || p != part.data() + part.size())
      throw ParseError("bad date '" + std::string(s) + "'", line);
    return v;
  };
  CivilDate d;
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    d = {num(s.substr(0, 4)), num(s.substr(5, 2)), num(s.substr(8, 2))};
  } else if (s.size() == 7 && s[4] == '-') {
    d = {num(s.substr(0, 4)), num(s.substr(5, 2)), 1};
  } else {
    throw ParseError("bad date '" + std::string(s) + "' (expected YYYY-MM-DD)", line);
  }
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    throw ParseError("date out of range '" + std::string(s) + "'", line);
  return d;
}

struct StationMeta {
  std::string station_id;
  double lat = std::numeric_limits<double>::quiet_NaN();
  double lon = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> elevation;
  std::string state;
};

// Daily observations on the 365-day calendar. Row i is year start_year + i,
// column d - 1 is day-of-year d. Masked cells hold NaN.
struct StationSeries {
  StationMeta meta;
  Variable variable = Variable::Dmx;
  int start_year = 0;
  int end_year = -1;
  Eigen::MatrixXd values;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;  // true = observed

  int years() const { return end_year - start_year + 1; }
  Eigen::Index cells() const { return values.size(); }
  bool observed(int year_idx, int d) const { return mask(year_idx, d - 1); }
  double value(int year_idx, int d) const { return values(year_idx, d - 1); }
  Eigen::Index n_observed() const { return mask.count(); }
  Eigen::Index n_missing() const { return cells() - n_observed(); }

  // Observation at running cell index c = year_idx * 365 + (d - 1).
  bool observed_cell(Eigen::Index c) const { return mask(c / kDaysPerYear, c % kDaysPerYear); }
  double value_cell(Eigen::Index c) const { return values(c / kDaysPerYear, c % kDaysPerYear); }

  static StationSeries empty(StationMeta meta, Variable var, YearRange span) {
    StationSeries s;
    s.meta = std::move(meta);
    s.variable = var;
    s.start_year = span.first;
    s.end_year = span.last;
    s.values = Eigen::MatrixXd::Constant(span.years(), kDaysPerYear,
                                         std::numeric_limits<double>::quiet_NaN());
    s.mask.setConstant(span.years(), kDaysPerYear, false);
    return s;
  }

  void set(int year_idx, int d, double v) {
    values(year_idx, d - 1) = v;
    mask(year_idx, d - 1) = true;
  }
  void clear(int year_idx, int d) {
    values(year_idx, d - 1) = std::numeric_limits<double>::quiet_NaN();
    mask(year_idx, d - 1) = false;
  }
};

// One dated row from a series file, before placement on the 365-day grid.
struct DailyObservation {
  CivilDate date;
  std::optional<double> value;
};

struct RawSeries {
  std::string station_id;
  std::vector<DailyObservation> rows;
};

struct CovariateSeries {
  std::string name;
  int start_year = 0;
  Eigen::MatrixXd values;  // years x 365

  int years() const { return static_cast<int>(values.rows()); }
  double at_cell(Eigen::Index c) const { return values(c / kDaysPerYear, c % kDaysPerYear); }
};

struct TimeIndex {
  long t_raw = 0;  // 1..N
  double t_norm = 0.0;
  int d = 0;  // 1..365
  int year = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_value(std::string_view s, std::size_t line) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan") return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
    throw ParseError("bad numeric value '" + std::string(s) + "'", line);
  return v;
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  return in;
}

inline void expect_header(std::string_view got, std::string_view want, const std::string& path) {
  if (trim(got) != want)
    throw SchemaError(path + ": expected header '" + std::string(want) + "', got '" +
                      std::string(trim(got)) + "'");
}

}  // namespace detail

inline RawSeries read_series_rows(const std::string& path) {
  auto in = detail::open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  detail::expect_header(line, "station_id,date,value", path);
  RawSeries raw;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3) throw ParseError(path + ": expected 3 columns", lineno);
    if (raw.rows.empty() && raw.station_id.empty()) {
      raw.station_id = std::string(cols[0]);
    } else if (cols[0] != raw.station_id) {
      throw SchemaError(path + ": mixed station ids '" + raw.station_id + "' and '" +
                        std::string(cols[0]) + "' (line " + std::to_string(lineno) + ")");
    }
    raw.rows.push_back({parse_date(cols[1], lineno), detail::parse_value(cols[2], lineno)});
  }
  return raw;
}

// Removes Feb 29 rows. Idempotent.
inline RawSeries drop_leap_days(RawSeries raw) {
  std::erase_if(raw.rows, [](const DailyObservation& o) { return o.date.month == 2 && o.date.day == 29; });
  return raw;
}

// Places leap-free rows on the 365-day grid spanning `span` (or the file's
// years when absent). Rows outside the span are ignored.
inline StationSeries to_station_series(const RawSeries& raw, Variable var,
                                       std::optional<YearRange> span = std::nullopt) {
  if (!span) {
    if (raw.rows.empty()) throw SchemaError("series '" + raw.station_id + "' has no rows");
    auto [lo, hi] = std::minmax_element(raw.rows.begin(), raw.rows.end(),
                                        [](const auto& a, const auto& b) { return a.date < b.date; });
    span = YearRange{lo->date.year, hi->date.year};
  }
  StationMeta meta;
  meta.station_id = raw.station_id;
  auto s = StationSeries::empty(meta, var, *span);
  std::set<CivilDate> seen;
  for (const auto& row : raw.rows) {
    if (row.date.month == 2 && row.date.day == 29)
      throw DomainError("leap day present; call drop_leap_days first");
    if (row.date.year < span->first || row.date.year > span->last) continue;
    if (!seen.insert(row.date).second)
      throw SchemaError("series '" + raw.station_id + "': duplicate date " +
                        std::to_string(row.date.year) + "-" + std::to_string(row.date.month) + "-" +
                        std::to_string(row.date.day));
    if (row.value) s.set(row.date.year - span->first, noleap_day_of_year(row.date.month, row.date.day), *row.value);
  }
  return s;
}

inline StationSeries load_station_csv(const std::string& path, Variable var,
                                      std::optional<YearRange> span = std::nullopt) {
  return to_station_series(drop_leap_days(read_series_rows(path)), var, span);
}

// Metadata file: station_id,lat,lon,elevation,state
inline std::vector<StationMeta> load_metadata_csv(const std::string& path) {
  auto in = detail::open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  detail::expect_header(line, "station_id,lat,lon,elevation,state", path);
  std::vector<StationMeta> out;
  std::set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 5) throw ParseError(path + ": expected 5 columns", lineno);
    StationMeta m;
    m.station_id = std::string(cols[0]);
    const auto lat = detail::parse_value(cols[1], lineno);
    const auto lon = detail::parse_value(cols[2], lineno);
    if (!lat || !lon) throw ParseError(path + ": lat/lon required", lineno);
    m.lat = *lat;
    m.lon = *lon;
    m.elevation = detail::parse_value(cols[3], lineno);
    m.state = std::string(cols[4]);
    if (!ids.insert(m.station_id).second)
      throw SchemaError(path + ": duplicate station_id '" + m.station_id + "'");
    out.push_back(std::move(m));
  }
  return out;
}

// Covariate file: date,value. When no calendar month carries more than one
// row the file is treated as monthly and each value is broadcast to every day
// of its month.
inline CovariateSeries load_covariate_csv(const std::string& path, const std::string& name, YearRange span) {
  auto in = detail::open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  detail::expect_header(line, "date,value", path);
  std::vector<std::pair<CivilDate, double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 2) throw ParseError(path + ": expected 2 columns", lineno);
    const auto v = detail::parse_value(cols[1], lineno);
    if (!v) throw ParseError(path + ": covariate values must be present", lineno);
    rows.emplace_back(parse_date(cols[0], lineno), *v);
  }
  std::map<std::pair<int, int>, int> per_month;
  for (const auto& [d, v] : rows) ++per_month[{d.year, d.month}];
  const bool monthly = std::all_of(per_month.begin(), per_month.end(), [](const auto& kv) { return kv.second == 1; });

  CovariateSeries cov;
  cov.name = name;
  cov.start_year = span.first;
  cov.values = Eigen::MatrixXd::Constant(span.years(), kDaysPerYear, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [date, v] : rows) {
    if (date.year < span.first || date.year > span.last) continue;
    const int yi = date.year - span.first;
    if (monthly) {
      const int first = noleap_day_of_year(date.month, 1);
      const int n = date.month == 2 ? 28 : days_in_month(date.year, date.month);
      for (int d = first; d < first + n; ++d) cov.values(yi, d - 1) = v;
    } else if (!(date.month == 2 && date.day == 29)) {
      cov.values(yi, noleap_day_of_year(date.month, date.day) - 1) = v;
    }
  }
  if (!cov.values.allFinite())
    throw SchemaError(path + ": covariate '" + name + "' does not cover " + std::to_string(span.first) +
                      "-" + std::to_string(span.last));
  return cov;
}

enum class MissingBasis {
  StudyWindow,    // fraction over every cell of the series window
  OperatingSpan,  // fraction over first..last observed cell
};

inline double missing_fraction(const StationSeries& s, MissingBasis basis = MissingBasis::StudyWindow) {
  if (s.cells() == 0) return 1.0;
  if (basis == MissingBasis::StudyWindow)
    return static_cast<double>(s.n_missing()) / static_cast<double>(s.cells());
  Eigen::Index first = -1, last = -1;
  for (Eigen::Index c = 0; c < s.cells(); ++c)
    if (s.observed_cell(c)) {
      if (first < 0) first = c;
      last = c;
    }
  if (first < 0) return 1.0;
  const auto span = last - first + 1;
  return static_cast<double>(span - s.n_observed()) / static_cast<double>(span);
}

// Calendar years containing the first and last observed values.
inline std::optional<YearRange> observed_years(const StationSeries& s) {
  std::optional<YearRange> r;
  for (int i = 0; i < s.years(); ++i)
    if (s.mask.row(i).any()) {
      if (!r) r = YearRange{s.start_year + i, s.start_year + i};
      r->last = s.start_year + i;
    }
  return r;
}

struct FilterResult {
  std::vector<StationSeries> retained;
  std::vector<std::string> excluded;  // station ids
  std::size_t warnings = 0;           // 1 when nothing survived
};

inline FilterResult filter_stations(std::vector<StationSeries> stations, double max_missing_frac,
                                    YearRange required_span,
                                    MissingBasis basis = MissingBasis::StudyWindow) {
  if (!(max_missing_frac >= 0.0 && max_missing_frac <= 1.0))
    throw DomainError("max_missing_frac must lie in [0, 1]");
  FilterResult out;
  for (auto& s : stations) {
    const auto obs = observed_years(s);
    const bool covers = obs && obs->first <= required_span.first && obs->last >= required_span.last;
    const bool complete = missing_fraction(s, basis) <= max_missing_frac + 1e-12;
    if (covers && complete)
      out.retained.push_back(std::move(s));
    else
      out.excluded.push_back(s.meta.station_id);
  }
  if (out.retained.empty()) out.warnings = 1;
  return out;
}

inline double normalized_time(long t_raw, long n) {
  if (n < 2) throw DomainError("degenerate time span: need at least two days");
  return static_cast<double>(t_raw - 1) / static_cast<double>(n - 1);
}

// One entry per cell of a window starting on Jan 1 of first_year.
inline std::vector<TimeIndex> time_index(int first_year, long n_days) {
  if (n_days < 2) throw DomainError("degenerate time span: need at least two days");
  std::vector<TimeIndex> out(static_cast<std::size_t>(n_days));
  for (long c = 0; c < n_days; ++c) {
    auto& ti = out[static_cast<std::size_t>(c)];
    ti.t_raw = c + 1;
    ti.t_norm = normalized_time(ti.t_raw, n_days);
    ti.d = static_cast<int>(c % kDaysPerYear) + 1;
    ti.year = first_year + static_cast<int>(c / kDaysPerYear);
  }
  return out;
}

inline std::vector<TimeIndex> time_index(const StationSeries& s) { return time_index(s.start_year, s.cells()); }

enum class Season { All, Summer, Winter };  // Summer = DJF, Winter = JJA

inline Season parse_season(std::string_view s) {
  if (s == "all") return Season::All;
  if (s == "djf" || s == "summer") return Season::Summer;
  if (s == "jja" || s == "winter") return Season::Winter;
  throw ConfigError("unknown season '" + std::string(s) + "' (expected all, djf or jja)");
}

inline std::string to_string(Season s) {
  switch (s) {
    case Season::Summer: return "djf";
    case Season::Winter: return "jja";
    default: return "all";
  }
}

inline bool in_season(int d, Season s) {
  if (s == Season::All) return true;
  const int m = month_of_day(d);
  if (s == Season::Summer) return m == 12 || m == 1 || m == 2;
  return m == 6 || m == 7 || m == 8;
}

}  // namespace stqr
