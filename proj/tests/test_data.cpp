#include <gtest/gtest.h>

#include <random>

#include "stqr/data.hpp"
#include "test_util.hpp"

using namespace stqr;
using stqr::testing::series_csv;
using stqr::testing::TempDir;
using stqr::testing::write_text;

namespace {

StationSeries series_with_missing(const std::string& id, int years, int n_missing) {
  StationMeta m;
  m.station_id = id;
  m.lat = -30.0;
  m.lon = 140.0;
  auto s = StationSeries::empty(m, Variable::Dmx, {2000, 2000 + years - 1});
  for (Eigen::Index c = 0; c < s.cells(); ++c) s.set(static_cast<int>(c / 365), static_cast<int>(c % 365) + 1, 20.0);
  // Remove interior cells so the first and last years stay observed.
  for (int k = 0; k < n_missing; ++k) {
    const Eigen::Index c = 1 + k;
    s.clear(static_cast<int>(c / 365), static_cast<int>(c % 365) + 1);
  }
  return s;
}

}  // namespace

TEST(Calendar, NoLeapDayOfYear) {
  EXPECT_EQ(noleap_day_of_year(1, 1), 1);
  EXPECT_EQ(noleap_day_of_year(2, 28), 59);
  EXPECT_EQ(noleap_day_of_year(3, 1), 60);
  EXPECT_EQ(noleap_day_of_year(12, 31), 365);
  for (int d = 1; d <= 365; ++d) EXPECT_GE(month_of_day(d), 1);
  EXPECT_EQ(month_of_day(1), 1);
  EXPECT_EQ(month_of_day(60), 3);
  EXPECT_EQ(month_of_day(365), 12);
}

TEST(LoadStationCsv, CompleteYearHasNoMissing) {
  TempDir dir("data");
  write_text(dir.file("a.csv"), series_csv("A", 2001, 2001, [](int, int m, int d) { return m + d / 100.0; }));
  const auto s = load_station_csv(dir.file("a.csv"), Variable::Dmx);
  EXPECT_EQ(s.years(), 1);
  EXPECT_EQ(s.cells(), 365);
  EXPECT_EQ(s.n_missing(), 0);
  EXPECT_EQ(s.meta.station_id, "A");
  EXPECT_DOUBLE_EQ(s.value(0, 60), 3.01);
}

TEST(LoadStationCsv, LeapDayDroppedAndMarchFirstAtDay60) {
  TempDir dir("data");
  write_text(dir.file("a.csv"), series_csv("A", 2004, 2004, [](int, int m, int d) { return 100.0 * m + d; }));
  const auto raw = read_series_rows(dir.file("a.csv"));
  EXPECT_EQ(raw.rows.size(), 366u);
  const auto s = load_station_csv(dir.file("a.csv"), Variable::Dmn);
  EXPECT_EQ(s.cells(), 365);
  EXPECT_EQ(s.n_observed(), 365);
  EXPECT_DOUBLE_EQ(s.value(0, 59), 228.0);
  EXPECT_DOUBLE_EQ(s.value(0, 60), 301.0);
  EXPECT_DOUBLE_EQ(s.value(0, 365), 1231.0);
}

TEST(LoadStationCsv, OneMissingDay) {
  TempDir dir("data");
  write_text(dir.file("a.csv"),
             series_csv("A", 2001, 2001, [](int, int m, int d) { return (m == 7 && d == 4) ? NAN : 1.0; }));
  const auto s = load_station_csv(dir.file("a.csv"), Variable::Dmx);
  EXPECT_EQ(s.n_missing(), 1);
  EXPECT_FALSE(s.observed(0, noleap_day_of_year(7, 4)));
  EXPECT_TRUE(std::isnan(s.value(0, noleap_day_of_year(7, 4))));
}

TEST(LoadStationCsv, AbsentRowsAreMasked) {
  TempDir dir("data");
  write_text(dir.file("a.csv"), series_csv("A", 2001, 2002, [](int, int, int) { return 1.0; },
                                           [](int y, int m, int) { return y == 2002 && m == 12; }));
  const auto s = load_station_csv(dir.file("a.csv"), Variable::Dmx);
  EXPECT_EQ(s.n_missing(), 31);
  EXPECT_EQ(s.n_missing() + s.n_observed(), s.years() * 365);
}

TEST(LoadStationCsv, MalformedRowReportsLine) {
  TempDir dir("data");
  write_text(dir.file("a.csv"), "station_id,date,value\nA,2001-01-01,1.0\nA,2001-01-02,abc\n");
  try {
    load_station_csv(dir.file("a.csv"), Variable::Dmx);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(dir.file("b.csv"), "station_id,date,value\nA,2001-13-01,1.0\n");
  EXPECT_THROW(load_station_csv(dir.file("b.csv"), Variable::Dmx), ParseError);
}

TEST(LoadStationCsv, MixedIdsAreSchemaError) {
  TempDir dir("data");
  write_text(dir.file("a.csv"), "station_id,date,value\nA,2001-01-01,1.0\nB,2001-01-02,2.0\n");
  EXPECT_THROW(load_station_csv(dir.file("a.csv"), Variable::Dmx), SchemaError);
  write_text(dir.file("h.csv"), "id,date,value\nA,2001-01-01,1.0\n");
  EXPECT_THROW(load_station_csv(dir.file("h.csv"), Variable::Dmx), SchemaError);
}

TEST(LoadStationCsv, DuplicateDateRejected) {
  TempDir dir("data");
  write_text(dir.file("a.csv"), "station_id,date,value\nA,2001-01-01,1.0\nA,2001-01-01,2.0\n");
  EXPECT_THROW(load_station_csv(dir.file("a.csv"), Variable::Dmx), SchemaError);
}

TEST(DropLeapDays, Idempotent) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    RawSeries raw;
    raw.station_id = "X";
    std::uniform_int_distribution<int> Y(1999, 2005), M(1, 12), D(1, 31);
    for (int i = 0; i < 200; ++i) {
      const int y = Y(rng), m = M(rng);
      const int d = std::min(D(rng), days_in_month(y, m));
      raw.rows.push_back({{y, m, d}, static_cast<double>(i)});
    }
    raw.rows.push_back({{2004, 2, 29}, 1.0});
    const auto once = drop_leap_days(raw);
    const auto twice = drop_leap_days(once);
    ASSERT_EQ(once.rows.size(), twice.rows.size());
    for (std::size_t i = 0; i < once.rows.size(); ++i) {
      EXPECT_EQ(once.rows[i].date, twice.rows[i].date);
      EXPECT_EQ(once.rows[i].value, twice.rows[i].value);
      EXPECT_FALSE(once.rows[i].date.month == 2 && once.rows[i].date.day == 29);
    }
  }
}

TEST(DropLeapDays, NonLeapSeriesUnchanged) {
  RawSeries raw;
  raw.station_id = "X";
  for (int d = 1; d <= 28; ++d) raw.rows.push_back({{2001, 2, d}, 1.0 * d});
  const auto out = drop_leap_days(raw);
  ASSERT_EQ(out.rows.size(), raw.rows.size());
  for (std::size_t i = 0; i < out.rows.size(); ++i) EXPECT_EQ(out.rows[i].date, raw.rows[i].date);
}

TEST(Metadata, LoadsAndRejectsDuplicates) {
  TempDir dir("data");
  write_text(dir.file("m.csv"), "station_id,lat,lon,elevation,state\nA,-33.9,151.2,39,NSW\nB,-37.8,145.0,,VIC\n");
  const auto m = load_metadata_csv(dir.file("m.csv"));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].station_id, "A");
  EXPECT_DOUBLE_EQ(m[0].lat, -33.9);
  ASSERT_TRUE(m[0].elevation.has_value());
  EXPECT_DOUBLE_EQ(*m[0].elevation, 39.0);
  EXPECT_FALSE(m[1].elevation.has_value());
  EXPECT_EQ(m[1].state, "VIC");
  write_text(dir.file("d.csv"), "station_id,lat,lon,elevation,state\nA,-33.9,151.2,39,NSW\nA,-37.8,145.0,,VIC\n");
  EXPECT_THROW(load_metadata_csv(dir.file("d.csv")), SchemaError);
}

TEST(Covariates, MonthlyBroadcastToDays) {
  TempDir dir("data");
  std::string text = "date,value\n";
  for (int y = 2000; y <= 2001; ++y)
    for (int m = 1; m <= 12; ++m) text += stqr::testing::iso_date(y, m, 1).substr(0, 7) + "," + std::to_string(m + 12 * (y - 2000)) + "\n";
  write_text(dir.file("soi.csv"), text);
  const auto c = load_covariate_csv(dir.file("soi.csv"), "soi", {2000, 2001});
  EXPECT_EQ(c.years(), 2);
  EXPECT_DOUBLE_EQ(c.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c.values(0, 58), 2.0);
  EXPECT_DOUBLE_EQ(c.values(0, 59), 3.0);
  EXPECT_DOUBLE_EQ(c.values(1, 364), 24.0);
  EXPECT_THROW(load_covariate_csv(dir.file("soi.csv"), "soi", {2000, 2002}), SchemaError);
}

TEST(FilterStations, TwentyFivePercentExcludedAtTwenty) {
  std::vector<StationSeries> v{series_with_missing("A", 4, 365)};  // 25%
  const auto r = filter_stations(v, 0.20, {2000, 2003});
  EXPECT_TRUE(r.retained.empty());
  EXPECT_EQ(r.excluded.size(), 1u);
  EXPECT_EQ(r.warnings, 1u);
}

TEST(FilterStations, ThresholdOneRetainsAll) {
  std::vector<StationSeries> v;
  for (int i = 0; i < 5; ++i) v.push_back(series_with_missing("S" + std::to_string(i), 4, 300 * i));
  EXPECT_EQ(filter_stations(v, 1.0, {2000, 2003}).retained.size(), 5u);
}

TEST(FilterStations, KnownFractionsCountOracle) {
  // 20 years = 7300 cells; fraction 0.05 j is exactly 365 j cells.
  std::vector<StationSeries> v;
  for (int j = 1; j <= 10; ++j) v.push_back(series_with_missing("S" + std::to_string(j), 20, 365 * j));
  for (int j = 1; j <= 10; ++j) EXPECT_DOUBLE_EQ(missing_fraction(v[static_cast<std::size_t>(j - 1)]), 0.05 * j);
  const auto r = filter_stations(v, 0.20, {2000, 2019});
  EXPECT_EQ(r.retained.size(), 4u);
}

TEST(FilterStations, RequiresSpanCoverage) {
  auto s = series_with_missing("A", 4, 0);
  for (int d = 1; d <= 365; ++d) s.clear(3, d);
  EXPECT_TRUE(filter_stations({s}, 1.0, {2000, 2003}).retained.empty());
  EXPECT_EQ(filter_stations({s}, 1.0, {2000, 2002}).retained.size(), 1u);
}

TEST(FilterStations, OperatingSpanBasis) {
  auto s = series_with_missing("A", 4, 0);
  for (int d = 1; d <= 365; ++d) s.clear(0, d);  // first year absent
  EXPECT_DOUBLE_EQ(missing_fraction(s, MissingBasis::StudyWindow), 0.25);
  EXPECT_DOUBLE_EQ(missing_fraction(s, MissingBasis::OperatingSpan), 0.0);
}

TEST(TimeIndex, Endpoints) {
  const auto ti = time_index(2000, 2);
  EXPECT_DOUBLE_EQ(ti[0].t_norm, 0.0);
  EXPECT_DOUBLE_EQ(ti[1].t_norm, 1.0);
  EXPECT_THROW(time_index(2000, 1), DomainError);
}

TEST(TimeIndex, SixtyYearOracle) {
  const auto ti = time_index(1960, 60L * 365);
  // First day of year 31 is cell 30 * 365; frozen value of 30*365/(60*365-1).
  EXPECT_NEAR(ti[30 * 365].t_norm, 0.50002283209278962510, 1e-15);
  EXPECT_EQ(ti[30 * 365].year, 1990);
  EXPECT_EQ(ti[30 * 365].d, 1);
  for (int y = 0; y < 60; ++y) EXPECT_EQ(ti[static_cast<std::size_t>(y * 365 + 364)].d, 365);
}

TEST(TimeIndex, StrictlyIncreasingAndAffine) {
  const auto ti = time_index(1990, 3650);
  for (std::size_t i = 1; i < ti.size(); ++i) EXPECT_GT(ti[i].t_norm, ti[i - 1].t_norm);
  const auto& a = ti[10];
  const auto& b = ti[1000];
  const auto& c = ti[3000];
  const double s1 = (b.t_norm - a.t_norm) / static_cast<double>(b.t_raw - a.t_raw);
  const double s2 = (c.t_norm - b.t_norm) / static_cast<double>(c.t_raw - b.t_raw);
  EXPECT_NEAR(s1, s2, 1e-15);
}

TEST(Season, MembershipAndParsing) {
  EXPECT_TRUE(in_season(1, Season::Summer));
  EXPECT_TRUE(in_season(365, Season::Summer));
  EXPECT_FALSE(in_season(60, Season::Summer));
  EXPECT_TRUE(in_season(noleap_day_of_year(7, 15), Season::Winter));
  EXPECT_FALSE(in_season(noleap_day_of_year(9, 1), Season::Winter));
  int n = 0;
  for (int d = 1; d <= 365; ++d) n += in_season(d, Season::Summer);
  EXPECT_EQ(n, 31 + 31 + 28);
  EXPECT_EQ(parse_season("djf"), Season::Summer);
  EXPECT_EQ(parse_season("jja"), Season::Winter);
  EXPECT_THROW(parse_season("spring"), ConfigError);
}
