#pragma once

// Scenario files, cover/collection description files and the report writers
// shared by the pbsurf command line tool and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pbsurf/collection.hpp"
#include "pbsurf/cover.hpp"
#include "pbsurf/optimize.hpp"
#include "pbsurf/verify.hpp"

namespace pbsurf::cli {

using Json = nlohmann::json;

enum class LogLevel { error = 0, info = 1, debug = 2 };
/// Level from PBSURF_LOG (error, info or debug); error when unset.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

/// Parses a JSON file. Syntax errors become Error(parse) with line and
/// column; a missing file is Error(io).
Json read_json(const std::filesystem::path& path);

ChartPtr chart_from_json(const Json& j);
Json chart_to_json(const SurfaceChart& c);

/// Cover description: {"chart", "discs": [...], "localization": [[u, v], ...]}.
/// Disc entries are {"type": "geometric", "center", "radius"},
/// {"type": "implicit", "field": dump path}, or {"type": "cap", "z0", "north"}.
/// Relative paths resolve against base_dir.
Cover cover_from_json(const Json& j, const std::filesystem::path& base_dir, const ChartPtr& chart = nullptr);
/// Collection description: {"mode", "fields": [{"disc", source}]} where the
/// source is "bump": {...}, "dump": path or "formula": "sharpness" with "d"
/// and "index".
PositiveCollection collection_from_json(const Json& j, const std::filesystem::path& base_dir,
                                        const ChartPtr& chart);

/// Writes field dumps next to the description files and returns the paths
/// written (cover.json, collection.json and the dumps).
std::vector<std::filesystem::path> save_cover(const Cover& U, const std::filesystem::path& dir);
std::vector<std::filesystem::path> save_collection(const PositiveCollection& F,
                                                   const std::filesystem::path& dir);

struct Overrides {
  std::optional<int> grid;
  std::optional<unsigned> threads;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  /// Measured runtimes in the CSV. Off by default so reports are
  /// byte-reproducible; the column then reads NA.
  bool timing = false;
};

struct ReportRow {
  std::string scenario;
  std::string check;
  double value = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  std::string status;  // pass, fail, skipped:hypotheses or error:<code>
  std::string grid;
  double runtime_ms = -1.0;  // negative when not measured

  bool counts_as_failure() const { return status != "pass" && status.rfind("skipped", 0) != 0; }
};

struct ScenarioResult {
  std::string id;
  std::vector<ReportRow> rows;
  std::vector<std::filesystem::path> files;
  int exit_code = 0;  // 0 when every non-skipped row passes, 1 otherwise
};

/// Loads and runs a scenario, writing report.csv and plot files into the
/// output directory. Scenario problems throw Error(parse) or Error(io).
ScenarioResult run_scenario(const std::filesystem::path& path, const Overrides& overrides = {});

/// Loads the scenario's cover and collection (after any covering map) and
/// runs only its optimizer block.
struct OptimizeOutcome {
  OptimizeResult result;
  std::vector<std::filesystem::path> files;
  double initial_pb = 0.0;
};
OptimizeOutcome run_scenario_optimizer(const std::filesystem::path& path, const Overrides& overrides = {});

std::string csv_header();
std::string csv_line(const ReportRow& row);
void write_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
/// Two-column text with a comment header; rows may be empty.
void write_columns(const std::filesystem::path& path, const std::string& x_name, const std::string& y_name,
                   const std::vector<std::pair<double, double>>& rows);

ReportRow row_from_report(const std::string& scenario, const std::string& check, const CheckReport& r,
                          const SurfaceChart& chart);

/// North-disc integral of the sphere family for each d, paired with 1/d.
std::vector<std::pair<double, double>> sharpness_sweep(const std::vector<int>& ds, int n_theta, int n_z);

}  // namespace pbsurf::cli
