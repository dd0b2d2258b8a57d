#include "floq/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "floq/version.hpp"

namespace floq {

namespace {

using nlohmann::json;

// Keys accepted per command; anything else is rejected so every accepted key
// can be echoed back in the result manifest.
const std::map<std::string, std::set<std::string>> kCommandKeys = {
    {"heat",
     {"L", "Ng", "seed", "omega", "t_max", "t_dense", "stride", "precision", "q", "out"}},
    {"echo", {"L", "Ng", "seed", "omega", "tf_periods", "precision", "q", "out"}},
    {"bench", {"L", "Ng", "seed", "omega", "reps", "precision", "q", "out"}},
    {"fit", {"exclude", "out"}},
};

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "config key '" + key + "': '" + value + "' is not an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key,
                          "config key '" + key + "': '" + value + "' is not an unsigned integer");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "config key '" + key + "': '" + value + "' is not a number");
    }
}

// A single value, a comma list, or a "start:step:stop" inclusive range.
std::vector<double> parse_omega_list(const std::string& value) {
    std::vector<double> out;
    if (value.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(value);
        std::string piece;
        while (std::getline(ss, piece, ':')) {
            parts.push_back(trim(piece));
        }
        if (parts.size() != 3) {
            throw ConfigError("omega", "omega range must be start:step:stop");
        }
        const double start = parse_double("omega", parts[0]);
        const double step = parse_double("omega", parts[1]);
        const double stop = parse_double("omega", parts[2]);
        if (!(step > 0.0) || stop < start) {
            throw ConfigError("omega", "omega range must have step > 0 and stop >= start");
        }
        for (int i = 0;; ++i) {
            const double w = start + step * i;
            if (w > stop + 1e-9 * step) {
                break;
            }
            out.push_back(w);
        }
        return out;
    }
    std::stringstream ss(value);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        piece = trim(piece);
        if (piece.empty()) {
            throw ConfigError("omega", "empty entry in omega list");
        }
        out.push_back(parse_double("omega", piece));
    }
    if (out.empty()) {
        throw ConfigError("omega", "omega list is empty");
    }
    return out;
}

std::vector<int> parse_index_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    const std::string v = trim(value);
    if (v.empty() || v == "none") {
        return out;
    }
    std::stringstream ss(v);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        out.push_back(static_cast<int>(parse_int(key, trim(piece))));
    }
    return out;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto allowed = kCommandKeys.find(cfg.command);
    if (allowed == kCommandKeys.end()) {
        throw ConfigError("command", "unknown command '" + cfg.command + "'");
    }
    if (!allowed->second.contains(key)) {
        throw ConfigError(key, "unknown config key '" + key + "' for command '" +
                                   cfg.command + "'");
    }
    if (key == "L") {
        cfg.L = static_cast<int>(parse_int(key, value));
    } else if (key == "Ng") {
        cfg.Ng = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "omega") {
        cfg.omegas = parse_omega_list(value);
    } else if (key == "t_max") {
        cfg.t_max = parse_double(key, value);
    } else if (key == "t_dense") {
        cfg.t_dense = parse_double(key, value);
    } else if (key == "stride") {
        cfg.stride = static_cast<int>(parse_int(key, value));
    } else if (key == "precision") {
        cfg.precision = precision_from_string(value);
    } else if (key == "q") {
        cfg.fusion_window = static_cast<int>(parse_int(key, value));
    } else if (key == "tf_periods") {
        cfg.tf_periods = parse_int(key, value);
    } else if (key == "reps") {
        cfg.repetitions = static_cast<int>(parse_int(key, value));
    } else if (key == "exclude") {
        cfg.exclude = parse_index_list(key, value);
    } else if (key == "out") {
        cfg.out_dir = trim(value);
    }
}

void validate(const RunConfig& cfg) {
    const bool needs_system =
        cfg.command == "heat" || cfg.command == "echo" || cfg.command == "bench";
    if (needs_system) {
        if (cfg.L < 2 || cfg.L % 2 != 0) {
            throw ConfigError("L", "L must be an even qubit count >= 2");
        }
        if (cfg.Ng < 0 || cfg.Ng > cfg.L - 2) {
            std::ostringstream msg;
            msg << "Ng must satisfy 0 <= Ng <= L - 2 (got Ng = " << cfg.Ng
                << " with L = " << cfg.L << ")";
            throw ConfigError("Ng", msg.str());
        }
        if (cfg.omegas.empty()) {
            throw ConfigError("omega", "omega is required");
        }
        for (const double w : cfg.omegas) {
            if (!(w > 0.0)) {
                throw ConfigError("omega", "omega values must be positive");
            }
        }
        if (cfg.fusion_window < 2 || cfg.fusion_window > 12) {
            throw ConfigError("q", "fusion window q must be in [2, 12]");
        }
    }
    if (cfg.command == "heat") {
        if (cfg.t_max < 0.0) {
            throw ConfigError("t_max", "t_max must be >= 0");
        }
        if (cfg.t_dense < 0.0) {
            throw ConfigError("t_dense", "t_dense must be >= 0");
        }
        if (cfg.stride < 1) {
            throw ConfigError("stride", "stride must be >= 1");
        }
    }
    if (cfg.command == "echo") {
        if (cfg.omegas.size() != 1) {
            throw ConfigError("omega", "echo takes a single omega");
        }
        if (cfg.tf_periods < 0) {
            throw ConfigError("tf_periods", "tf_periods must be >= 0");
        }
    }
    if (cfg.command == "bench") {
        if (cfg.omegas.size() != 1) {
            throw ConfigError("omega", "bench takes a single omega");
        }
        if (cfg.repetitions < 10) {
            throw ConfigError("reps", "bench needs at least 10 repetitions");
        }
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_omega(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& contents,
                  bool force) {
    namespace fs = std::filesystem;
    if (fs::exists(path) && !force) {
        throw IoError("refusing to overwrite " + path.string() + " (use --force)");
    }
    const fs::path tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out << contents;
        if (!out) {
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " +
                      ec.message());
    }
}

std::string hash_hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t hash_from_hex(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

json config_echo(const HeatingConfig& cfg, const std::filesystem::path& out_dir) {
    return json{{"L", cfg.L},
                {"Ng", cfg.Ng},
                {"seed", cfg.seed},
                {"omega", cfg.omega},
                {"t_max", cfg.t_max},
                {"t_dense", cfg.t_dense},
                {"stride", cfg.stride},
                {"precision", to_string(cfg.precision)},
                {"q", cfg.fusion_window},
                {"out", out_dir.string()}};
}

std::string series_stem(const HeatingConfig& cfg) {
    std::ostringstream stem;
    stem << "heat_L" << cfg.L << "_Ng" << cfg.Ng << "_s" << cfg.seed << "_w"
         << format_omega(cfg.omega) << "_" << to_string(cfg.precision);
    return stem.str();
}

}  // namespace

std::string to_string(Precision p) {
    return p == Precision::Single ? "single" : "double";
}

Precision precision_from_string(const std::string& s) {
    if (s == "single") {
        return Precision::Single;
    }
    if (s == "double") {
        return Precision::Double;
    }
    throw ConfigError("precision", "precision must be 'single' or 'double', got '" + s + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot read config file " + file.string());
    }
    std::vector<std::pair<std::string, std::string>> entries;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << file.string() << ":" << lineno << ": expected 'key = value'";
            throw ConfigError("", msg.str());
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) {
            throw ConfigError(key, "duplicate config key '" + key + "'");
        }
        entries.emplace_back(key, value);
    }
    return entries;
}

RunConfig parse_config(const std::string& command,
                       const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    cfg.command = command;
    if (file) {
        for (const auto& [key, value] : read_config_file(*file)) {
            apply_override(cfg, key, value);
        }
    }
    for (const auto& [key, value] : overrides) {
        apply_override(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

HeatingConfig heating_config(const RunConfig& cfg, double omega) {
    HeatingConfig h;
    h.L = cfg.L;
    h.Ng = cfg.Ng;
    h.seed = cfg.seed;
    h.omega = omega;
    h.t_max = cfg.t_max;
    h.t_dense = cfg.t_dense;
    h.stride = cfg.stride;
    h.precision = cfg.precision;
    h.fusion_window = cfg.fusion_window;
    return h;
}

EchoConfig echo_config(const RunConfig& cfg) {
    EchoConfig e;
    e.L = cfg.L;
    e.Ng = cfg.Ng;
    e.seed = cfg.seed;
    e.omega = cfg.omegas.front();
    e.precision = cfg.precision;
    e.fusion_window = cfg.fusion_window;
    return e;
}

BenchConfig bench_config(const RunConfig& cfg) {
    BenchConfig b;
    b.L = cfg.L;
    b.Ng = cfg.Ng;
    b.seed = cfg.seed;
    b.omega = cfg.omegas.front();
    b.precision = cfg.precision;
    b.fusion_window = cfg.fusion_window;
    b.repetitions = cfg.repetitions;
    return b;
}

SeriesPaths emit_series(const ObservableSeries& series, const std::filesystem::path& dir,
                        bool force) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }

    const std::string stem = series_stem(series.config);
    SeriesPaths paths{dir / (stem + ".csv"), dir / (stem + ".json")};

    std::ostringstream csv;
    csv << "n,t,E,sigma_E,norm,gates\n";
    for (const auto& r : series.records) {
        csv << r.n << ',' << format_double(r.t) << ',' << format_double(r.energy) << ','
            << format_double(r.sigma) << ',' << format_double(r.norm) << ',' << r.gates
            << '\n';
    }
    atomic_write(paths.csv, csv.str(), force);

    json manifest;
    manifest["command"] = "heat";
    manifest["config"] = config_echo(series.config, dir);
    manifest["ensemble"] = {{"seed", series.ensemble.seed},
                            {"max_bonds", series.ensemble.max_bonds},
                            {"bond_hash", hash_hex(series.ensemble.bond_hash)}};
    manifest["run"] = {{"records", series.records.size()},
                       {"aborted", series.aborted},
                       {"clamp_events", series.clamp_events},
                       {"software", kVersion}};
    atomic_write(paths.manifest, manifest.dump(2) + "\n", force);
    return paths;
}

std::filesystem::path emit_echo_report(const EchoReport& report, const EchoConfig& cfg,
                                       const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    std::ostringstream stem;
    stem << "echo_L" << cfg.L << "_Ng" << cfg.Ng << "_s" << cfg.seed << "_w"
         << format_omega(cfg.omega) << "_" << to_string(cfg.precision) << "_n"
         << report.periods;
    const fs::path path = dir / (stem.str() + ".txt");
    const EnsembleSpec ensemble = build_ensemble(cfg.seed, cfg.L - 1);
    std::ostringstream out;
    out << "t_f = " << format_double(report.t_f) << "\n"
        << "periods = " << report.periods << "\n"
        << "overlap_error = " << format_double(report.overlap_error) << "\n"
        << "energy_rel_error = " << format_double(report.energy_rel_error) << "\n"
        << "sigma_rel_error = " << format_double(report.sigma_rel_error) << "\n"
        << "precision = " << to_string(report.precision) << "\n"
        << "L = " << cfg.L << "\n"
        << "Ng = " << cfg.Ng << "\n"
        << "seed = " << cfg.seed << "\n"
        << "omega = " << format_double(cfg.omega) << "\n"
        << "q = " << cfg.fusion_window << "\n"
        << "out = " << dir.string() << "\n"
        << "ensemble_max_bonds = " << ensemble.max_bonds << "\n"
        << "ensemble_bond_hash = " << hash_hex(ensemble.content_hash) << "\n"
        << "software = " << kVersion << "\n";
    atomic_write(path, out.str(), force);
    return path;
}

std::filesystem::path emit_bench_result(const BenchResult& result,
                                        const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    const auto& cfg = result.config;
    std::ostringstream stem;
    stem << "bench_L" << cfg.L << "_Ng" << cfg.Ng << "_q" << cfg.fusion_window << "_"
         << to_string(cfg.precision);
    const fs::path path = dir / (stem.str() + ".txt");
    const EnsembleSpec ensemble = build_ensemble(cfg.seed, cfg.L - 1);
    std::ostringstream out;
    out << "L = " << cfg.L << "\n"
        << "Ng = " << cfg.Ng << "\n"
        << "seed = " << cfg.seed << "\n"
        << "omega = " << format_double(cfg.omega) << "\n"
        << "q = " << cfg.fusion_window << "\n"
        << "precision = " << to_string(cfg.precision) << "\n"
        << "reps = " << cfg.repetitions << "\n"
        << "out = " << dir.string() << "\n"
        << "mean_period_s = " << format_double(result.mean_s) << "\n"
        << "min_period_s = " << format_double(result.min_s) << "\n"
        << "max_period_s = " << format_double(result.max_s) << "\n"
        << "lx2l_reference = " << format_double(static_cast<double>(cfg.L) *
                                                std::pow(2.0, cfg.L)) << "\n"
        << "ensemble_max_bonds = " << ensemble.max_bonds << "\n"
        << "ensemble_bond_hash = " << hash_hex(ensemble.content_hash) << "\n"
        << "software = " << kVersion << "\n";
    atomic_write(path, out.str(), force);
    return path;
}

RunConfig config_from_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) {
        throw IoError("cannot read manifest " + manifest.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest.string() + ": " + e.what());
    }
    RunConfig cfg;
    cfg.command = j.at("command").get<std::string>();
    const auto& c = j.at("config");
    cfg.L = c.at("L").get<int>();
    cfg.Ng = c.at("Ng").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.omegas = {c.at("omega").get<double>()};
    cfg.t_max = c.at("t_max").get<double>();
    cfg.t_dense = c.at("t_dense").get<double>();
    cfg.stride = c.at("stride").get<int>();
    cfg.precision = precision_from_string(c.at("precision").get<std::string>());
    cfg.fusion_window = c.at("q").get<int>();
    cfg.out_dir = c.at("out").get<std::string>();
    return cfg;
}

ObservableSeries load_series(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) {
        throw IoError("cannot read " + csv.string());
    }
    ObservableSeries series;

    std::filesystem::path manifest = csv;
    manifest.replace_extension(".json");
    if (std::filesystem::exists(manifest)) {
        const RunConfig cfg = config_from_manifest(manifest);
        series.config = heating_config(cfg, cfg.omegas.front());
        std::ifstream min(manifest);
        json j;
        min >> j;
        series.ensemble.seed = j.at("ensemble").at("seed").get<std::uint64_t>();
        series.ensemble.max_bonds = j.at("ensemble").at("max_bonds").get<int>();
        series.ensemble.bond_hash =
            hash_from_hex(j.at("ensemble").at("bond_hash").get<std::string>());
        series.aborted = j.at("run").at("aborted").get<bool>();
    }

    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("empty CSV " + csv.string());
    }
    if (trim(line) != "n,t,E,sigma_E,norm,gates") {
        throw IoError("unexpected CSV header in " + csv.string());
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() != 6) {
            std::ostringstream msg;
            msg << csv.string() << ":" << lineno << ": expected 6 fields";
            throw IoError(msg.str());
        }
        SeriesRecord r;
        r.n = std::stoll(fields[0]);
        r.t = std::stod(fields[1]);
        r.energy = std::stod(fields[2]);
        r.sigma = std::stod(fields[3]);
        r.norm = std::stod(fields[4]);
        r.gates = std::stoll(fields[5]);
        series.records.push_back(r);
    }
    return series;
}

FitOutcome fit_command(const std::vector<std::filesystem::path>& csvs,
                       const std::vector<int>& exclude, const std::filesystem::path& dir,
                       bool force) {
    if (csvs.empty()) {
        throw ConfigError("files", "fit needs at least one CSV");
    }
    FitOutcome outcome;

    for (const auto& path : csvs) {
        FitTableRow row;
        row.source = path.filename().string();
        try {
            const ObservableSeries series = load_series(path);
            if (series.config.omega <= 0.0) {
                throw IoError("missing manifest (omega unknown) for " + path.string());
            }
            row.omega = series.config.omega;
            const RateExtraction rate = extract_rate(series);
            row.gamma = rate.gamma;
        } catch (const NotThermalizedError& e) {
            row.failed = true;
            row.error = e.what();
            outcome.errors.push_back(path.filename().string() + ": " + e.what());
        }
        outcome.table.push_back(row);
    }
    std::sort(outcome.table.begin(), outcome.table.end(),
              [](const FitTableRow& a, const FitTableRow& b) {
                  if (a.failed != b.failed) {
                      return !a.failed;  // failures sort last
                  }
                  return a.omega < b.omega;
              });

    std::vector<RatePoint> points;
    for (const auto& row : outcome.table) {
        if (!row.failed) {
            points.push_back({row.omega, row.gamma});
        }
    }
    for (const int idx : exclude) {
        if (idx < 0 || idx >= static_cast<int>(points.size())) {
            throw ConfigError("exclude", "exclusion index out of range of the rate table");
        }
    }
    std::optional<std::string> fit_error;
    try {
        outcome.fit = fit_rates(points, exclude);
        for (const int idx : exclude) {
            outcome.table[static_cast<std::size_t>(idx)].excluded = true;
        }
    } catch (const std::invalid_argument& e) {
        fit_error = e.what();
        outcome.errors.emplace_back(std::string("fit: ") + e.what());
    }

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }

    std::ostringstream table;
    table << "# omega gamma ln_gamma excluded source\n";
    for (const auto& row : outcome.table) {
        if (row.failed) {
            table << "# failed: " << row.source << " (" << row.error << ")\n";
            continue;
        }
        table << format_double(row.omega) << ' ' << format_double(row.gamma) << ' '
              << format_double(std::log(row.gamma)) << ' ' << (row.excluded ? 1 : 0) << ' '
              << row.source << '\n';
    }
    outcome.table_path = dir / "fit_rates.txt";
    atomic_write(outcome.table_path, table.str(), force);

    std::ostringstream summary;
    if (outcome.fit) {
        const RateFit& f = *outcome.fit;
        summary << "model = ln(Gamma) = a*omega + b\n"
                << "a = " << format_double(f.slope) << "\n"
                << "a_se = " << format_double(f.slope_se) << "\n"
                << "b = " << format_double(f.intercept) << "\n"
                << "b_se = " << format_double(f.intercept_se) << "\n"
                << "rss = " << format_double(f.rss) << "\n"
                << "r_squared = " << format_double(f.r_squared) << "\n"
                << "points = " << f.points.size() << "\n"
                << "excluded = " << f.excluded.size() << "\n";
    } else {
        summary << "fit_failed = " << (fit_error ? *fit_error : std::string("unknown")) << "\n";
    }
    summary << "series_errors = " << outcome.errors.size() << "\n"
            << "software = " << kVersion << "\n";
    outcome.summary_path = dir / "fit_summary.txt";
    atomic_write(outcome.summary_path, summary.str(), force);

    return outcome;
}

}  // namespace floq
