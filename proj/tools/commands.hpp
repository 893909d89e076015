#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stqr/config.hpp"

namespace stqr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> stations;
  std::optional<Season> season;
  std::optional<std::vector<double>> tau;
  std::optional<double> max_missing;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

// Each command reads the files written by the ones before it under
// cfg.output_dir and writes its own.
void cmd_ingest(const RunConfig& cfg, std::ostream& log);
void cmd_explore(const RunConfig& cfg, std::ostream& log);
void cmd_fit_variance(const RunConfig& cfg, std::ostream& log);
void cmd_fit(const RunConfig& cfg, std::ostream& log);
void cmd_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_report(const RunConfig& cfg, std::ostream& log);

// Full command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stqr::cli
