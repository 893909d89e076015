#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stqr/data.hpp"

namespace stqr::testing {

// Asymptotic Kolmogorov p-value of the one-sample KS statistic with
// Stephens' small-sample correction.
inline double kolmogorov_pvalue(double d, double n) {
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    p += (j % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double ks_pvalue(const std::vector<double>& x, const std::function<double(double)>& cdf) {
  return kolmogorov_pvalue(ks_statistic(x, cdf), static_cast<double>(x.size()));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("stqr_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string iso_date(int y, int m, int d) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

// Series CSV over whole years; `value(y, m, d)` returns NaN for a missing row
// and skip(y, m, d) drops the row entirely.
inline std::string series_csv(const std::string& id, int y0, int y1,
                              const std::function<double(int, int, int)>& value,
                              const std::function<bool(int, int, int)>& skip = {}) {
  std::string s = "station_id,date,value\n";
  char buf[64];
  for (int y = y0; y <= y1; ++y)
    for (int m = 1; m <= 12; ++m)
      for (int d = 1; d <= days_in_month(y, m); ++d) {
        if (skip && skip(y, m, d)) continue;
        const double v = value(y, m, d);
        s += id + "," + iso_date(y, m, d) + ",";
        if (!std::isnan(v)) {
          std::snprintf(buf, sizeof buf, "%.6f", v);
          s += buf;
        }
        s += "\n";
      }
  return s;
}

}  // namespace stqr::testing
