#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "floq/experiment.hpp"

namespace floq {

class ConfigError : public std::invalid_argument {
  public:
    ConfigError(std::string field_, const std::string& msg)
        : std::invalid_argument(msg), field(std::move(field_)) {}
    std::string field;
};

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One fully validated invocation. `omegas` carries a single frequency for
/// echo/bench and one or more for a heat sweep.
struct RunConfig {
    std::string command;  // heat | echo | bench | fit
    int L = 0;
    int Ng = 0;
    std::uint64_t seed = 1;
    std::vector<double> omegas;
    double t_max = 0.0;
    double t_dense = 100.0;
    int stride = 10;
    Precision precision = Precision::Single;
    int fusion_window = 2;
    std::int64_t tf_periods = 0;  // echo
    int repetitions = 100;        // bench
    // fit: indices into the omega-sorted table; defaults to the two leftmost
    // frequencies ("exclude = none" clears it).
    std::vector<int> exclude = {0, 1};
    std::filesystem::path out_dir = "runs";
    bool force = false;

    bool operator==(const RunConfig&) const = default;
};

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

/// Builds a config from an optional flat key-value file plus ordered
/// overrides (command-line flags win over file values). Unknown keys and
/// constraint violations are rejected with the offending field named.
RunConfig parse_config(const std::string& command,
                       const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

/// Reads a flat `key = value` file; '#' starts a comment. Duplicate and
/// unknown keys are rejected.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& file);

HeatingConfig heating_config(const RunConfig& cfg, double omega);
EchoConfig echo_config(const RunConfig& cfg);
BenchConfig bench_config(const RunConfig& cfg);

struct SeriesPaths {
    std::filesystem::path csv;
    std::filesystem::path manifest;
};

/// CSV (columns n, t, E, sigma_E, norm, gates) plus a JSON manifest carrying
/// the config echo, the ensemble provenance record, and run metadata. Writes
/// are atomic (temp file + rename); existing outputs require `force`.
SeriesPaths emit_series(const ObservableSeries& series, const std::filesystem::path& dir,
                        bool force);

std::filesystem::path emit_echo_report(const EchoReport& report, const EchoConfig& cfg,
                                       const std::filesystem::path& dir, bool force);

std::filesystem::path emit_bench_result(const BenchResult& result,
                                        const std::filesystem::path& dir, bool force);

/// Parses a manifest back into the run config it echoed (round-trip of
/// emit_series for a single-frequency run).
RunConfig config_from_manifest(const std::filesystem::path& manifest);

/// Loads a series from its CSV; the sibling manifest supplies config and
/// ensemble metadata.
ObservableSeries load_series(const std::filesystem::path& csv);

struct FitTableRow {
    std::string source;
    double omega = 0.0;
    double gamma = 0.0;
    bool excluded = false;
    bool failed = false;
    std::string error;
};

struct FitOutcome {
    std::vector<FitTableRow> table;  // omega-sorted; failed rows carry errors
    std::optional<RateFit> fit;
    std::vector<std::string> errors;
    std::filesystem::path table_path;
    std::filesystem::path summary_path;
};

/// Extracts a rate from every CSV, fits ln Gamma = a omega + b over the
/// non-excluded points, and writes a gnuplot-ready table plus a fit summary.
/// Exclusion indices refer to the omega-sorted table.
FitOutcome fit_command(const std::vector<std::filesystem::path>& csvs,
                       const std::vector<int>& exclude, const std::filesystem::path& dir,
                       bool force);

}  // namespace floq
