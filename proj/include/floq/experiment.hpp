#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "floq/floquet.hpp"
#include "floq/sharded_state.hpp"

namespace floq {

class NotThermalizedError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class NormDriftError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HeatingConfig {
    int L = 0;
    int Ng = 0;
    std::uint64_t seed = 1;
    double omega = 0.0;
    double t_max = 0.0;
    double t_dense = 100.0;  // record every period while t <= t_dense
    int stride = 10;         // then every stride-th period
    Precision precision = Precision::Single;
    int fusion_window = 2;   // 2 disables fusion

    bool operator==(const HeatingConfig&) const = default;
};

struct SeriesRecord {
    std::int64_t n = 0;   // period index
    double t = 0.0;       // n * T
    double energy = 0.0;
    double sigma = 0.0;
    double norm = 0.0;    // ||psi||
    std::int64_t gates = 0;  // (L-1) * n

    bool operator==(const SeriesRecord&) const = default;
};

struct EnsembleManifest {
    std::uint64_t seed = 0;
    int max_bonds = 0;
    std::uint64_t bond_hash = 0;

    bool operator==(const EnsembleManifest&) const = default;
};

struct ObservableSeries {
    HeatingConfig config;
    EnsembleManifest ensemble;
    std::vector<SeriesRecord> records;
    bool aborted = false;    // norm drift beyond 1e-2 stopped the run
    int clamp_events = 0;    // variance clamps reported by energy_and_variance
};

/// Evolves the ground-state product state under U_F, recording E, sigma_E and
/// the norm on the dense-then-strided schedule. Deterministic for a fixed
/// config: all reduction orders are pinned.
ObservableSeries run_heating(const HeatingConfig& config);

/// Same, but reuses a pre-built circuit (its bonds also drive the energy
/// observable). The config's L and omega must match the circuit.
ObservableSeries run_heating(const HeatingConfig& config, const FloquetCircuit& circuit,
                             const EnsembleManifest& ensemble);

struct RateExtraction {
    double gamma = 0.0;  // 1 / (t2 - t1)
    double t1 = 0.0;     // first crossing of E(t) = E(0) e^{-1}
    double t2 = 0.0;     // first crossing of E(t) = E(0) e^{-2}
    bool non_monotone = false;  // some threshold was re-crossed; first crossing used
};

/// Threshold times are located by linear interpolation of E between adjacent
/// records in log t (linear t for the segment touching t = 0). Depends only on
/// E(t)/E(0), so it is invariant under uniform rescaling of E.
RateExtraction extract_rate(const ObservableSeries& series);

struct RatePoint {
    double omega = 0.0;
    double gamma = 0.0;
};

struct RateFit {
    std::vector<RatePoint> points;  // all points, including excluded ones
    std::vector<int> excluded;      // indices into points
    double slope = 0.0;             // a in ln Gamma = a omega + b
    double intercept = 0.0;         // b
    double slope_se = 0.0;
    double intercept_se = 0.0;
    double rss = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of ln Gamma against omega over the non-excluded
/// points; standard errors come from the residual variance.
RateFit fit_rates(const std::vector<RatePoint>& points, const std::vector<int>& exclude);

struct EchoConfig {
    int L = 0;
    int Ng = 0;
    std::uint64_t seed = 1;
    double omega = 0.0;
    Precision precision = Precision::Single;
    int fusion_window = 2;
};

struct EchoReport {
    double t_f = 0.0;
    std::int64_t periods = 0;
    double overlap_error = 0.0;
    double energy_rel_error = 0.0;
    double sigma_rel_error = 0.0;
    Precision precision = Precision::Single;
};

/// Evolves forward t_f / T periods, back with the adjoint circuit, and reports
/// the echo overlap error together with the relative E(0), sigma_E(0) errors.
/// t_f must be a whole number of periods.
EchoReport run_echo(const EchoConfig& config, double t_f);

/// Same, but reuses a pre-built circuit.
EchoReport run_echo(const EchoConfig& config, const FloquetCircuit& circuit, double t_f);

struct BenchConfig {
    int L = 0;
    int Ng = 0;
    std::uint64_t seed = 1;
    double omega = 8.0;
    Precision precision = Precision::Single;
    int fusion_window = 2;
    int repetitions = 100;
};

struct BenchResult {
    BenchConfig config;
    double mean_s = 0.0;
    double min_s = 0.0;
    double max_s = 0.0;
};

/// Wall time of one Floquet period, averaged over `repetitions` applications
/// after a short warmup.
BenchResult benchmark_period(const BenchConfig& config);

}  // namespace floq
