#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "floq/io.hpp"
#include "floq/version.hpp"

namespace {

namespace fs = std::filesystem;

struct CliArgs {
    std::optional<std::string> config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool force = false;
};

// Every option funnels through the same key/value dictionary as the config
// file, so file values and flags share one parser and one validation path.
void add_common_options(CLI::App* cmd, CliArgs& args,
                        const std::vector<std::string>& keys) {
    cmd->add_option_function<std::string>(
           "--config", [&args](const std::string& v) { args.config_file = v; },
           "flat key = value config file; flags override file values");
    for (const auto& key : keys) {
        const std::string flag = "--" + key;
        cmd->add_option_function<std::string>(
            flag, [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); },
            "config key '" + key + "'");
    }
    cmd->add_flag("--force", args.force, "overwrite existing output files");
}

int run_heat_command(const floq::RunConfig& cfg) {
    bool any_aborted = false;
    for (const double omega : cfg.omegas) {
        const floq::HeatingConfig hc = floq::heating_config(cfg, omega);
        std::fprintf(stderr, "heat: L=%d Ng=%d seed=%llu omega=%g t_max=%g (%s)\n", hc.L,
                     hc.Ng, static_cast<unsigned long long>(hc.seed), hc.omega, hc.t_max,
                     floq::to_string(hc.precision).c_str());
        const floq::ObservableSeries series = floq::run_heating(hc);
        const auto paths = floq::emit_series(series, cfg.out_dir, cfg.force);
        std::printf("%s\n", paths.csv.string().c_str());
        if (series.aborted) {
            std::fprintf(stderr, "heat: run aborted on norm drift after %zu records\n",
                         series.records.size());
            any_aborted = true;
        }
    }
    return any_aborted ? 2 : 0;
}

int run_echo_command(const floq::RunConfig& cfg) {
    const floq::EchoConfig ec = floq::echo_config(cfg);
    const double period = 2.0 * std::numbers::pi / ec.omega;
    const double t_f = static_cast<double>(cfg.tf_periods) * period;
    const floq::EchoReport report = floq::run_echo(ec, t_f);
    const auto path = floq::emit_echo_report(report, ec, cfg.out_dir, cfg.force);
    std::printf("%s\n", path.string().c_str());
    std::printf("overlap_error = %.6g\n", report.overlap_error);
    return 0;
}

int run_bench_command(const floq::RunConfig& cfg) {
    const floq::BenchConfig bc = floq::bench_config(cfg);
    const floq::BenchResult result = floq::benchmark_period(bc);
    const auto path = floq::emit_bench_result(result, cfg.out_dir, cfg.force);
    std::printf("%s\n", path.string().c_str());
    std::printf("L=%d period mean %.6g s (min %.6g, max %.6g) over %d reps\n", bc.L,
                result.mean_s, result.min_s, result.max_s, bc.repetitions);
    return 0;
}

int run_fit_command(const std::vector<std::string>& files, const floq::RunConfig& cfg) {
    std::vector<fs::path> paths(files.begin(), files.end());
    const floq::FitOutcome outcome =
        floq::fit_command(paths, cfg.exclude, cfg.out_dir, cfg.force);
    std::printf("%s\n%s\n", outcome.table_path.string().c_str(),
                outcome.summary_path.string().c_str());
    if (outcome.fit) {
        std::printf("a = %.6g +- %.6g, b = %.6g +- %.6g, R^2 = %.6g\n", outcome.fit->slope,
                    outcome.fit->slope_se, outcome.fit->intercept, outcome.fit->intercept_se,
                    outcome.fit->r_squared);
    }
    for (const auto& err : outcome.errors) {
        std::fprintf(stderr, "fit: %s\n", err.c_str());
    }
    return outcome.errors.empty() && outcome.fit ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(floq::kVersion) +
                 " - sharded state-vector simulator for driven spin chains"};
    app.require_subcommand(1);

    CliArgs heat_args;
    CliArgs echo_args;
    CliArgs bench_args;
    CliArgs fit_args;
    std::vector<std::string> fit_files;

    auto* heat = app.add_subcommand("heat", "long-time heating run(s); one CSV per omega");
    add_common_options(heat, heat_args,
                       {"L", "Ng", "seed", "omega", "t_max", "t_dense", "stride", "precision",
                        "q", "out"});

    auto* echo = app.add_subcommand("echo", "forward/backward echo precision audit");
    add_common_options(echo, echo_args,
                       {"L", "Ng", "seed", "omega", "tf_periods", "precision", "q", "out"});

    auto* bench = app.add_subcommand("bench", "wall time per Floquet period");
    add_common_options(bench, bench_args,
                       {"L", "Ng", "seed", "omega", "reps", "precision", "q", "out"});

    auto* fit = app.add_subcommand("fit", "extract rates from heat CSVs and fit ln Gamma");
    fit->add_option("files", fit_files, "heat CSV files")->required();
    add_common_options(fit, fit_args, {"exclude", "out"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (heat->parsed()) {
            floq::RunConfig cfg =
                floq::parse_config("heat", heat_args.config_file, heat_args.overrides);
            cfg.force = heat_args.force;
            return run_heat_command(cfg);
        }
        if (echo->parsed()) {
            floq::RunConfig cfg =
                floq::parse_config("echo", echo_args.config_file, echo_args.overrides);
            cfg.force = echo_args.force;
            return run_echo_command(cfg);
        }
        if (bench->parsed()) {
            floq::RunConfig cfg =
                floq::parse_config("bench", bench_args.config_file, bench_args.overrides);
            cfg.force = bench_args.force;
            return run_bench_command(cfg);
        }
        if (fit->parsed()) {
            floq::RunConfig cfg =
                floq::parse_config("fit", fit_args.config_file, fit_args.overrides);
            cfg.force = fit_args.force;
            return run_fit_command(fit_files, cfg);
        }
    } catch (const floq::ConfigError& e) {
        std::fprintf(stderr, "error (config%s%s): %s\n", e.field.empty() ? "" : " field ",
                     e.field.c_str(), e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error (validation): %s\n", e.what());
        return 1;
    } catch (const floq::IoError& e) {
        std::fprintf(stderr, "error (io): %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error (io): %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
