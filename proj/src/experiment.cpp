#include "floq/experiment.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace floq {

namespace {

std::int64_t periods_below(double t, double period) {
    // Guard against t being an exact multiple stored with rounding error.
    return static_cast<std::int64_t>(std::floor(t / period + 1e-9));
}

template <typename RealT>
ObservableSeries run_heating_impl(const HeatingConfig& cfg, const FloquetCircuit& circuit,
                                  const EnsembleManifest& ensemble) {
    const double T = circuit.period;

    ObservableSeries series;
    series.config = cfg;
    series.ensemble = ensemble;

    ShardLayout layout(cfg.L, cfg.Ng);
    ShardedState<RealT> psi = initial_state<RealT>(circuit, layout);
    const std::vector<GateBlock> gates = fuse_layer(period_gates(circuit), cfg.fusion_window);

    const std::int64_t n_max = periods_below(cfg.t_max, T);
    const std::int64_t n_dense = std::min(n_max, periods_below(cfg.t_dense, T));

    const auto record = [&](std::int64_t n) -> bool {
        const double norm = std::sqrt(norm_squared(psi));
        if (std::abs(norm - 1.0) > 1e-2) {
            series.aborted = true;
            return false;
        }
        EnergyMoments m;
        try {
            m = energy_and_variance(psi, circuit);
        } catch (const std::domain_error&) {
            // Norm drifted past the observable precondition; treat as blow-up.
            series.aborted = true;
            return false;
        }
        if (m.clamped) {
            ++series.clamp_events;
        }
        series.records.push_back({n, static_cast<double>(n) * T, m.energy, m.sigma, norm,
                                  static_cast<std::int64_t>(cfg.L - 1) * n});
        return true;
    };

    if (!record(0)) {
        return series;
    }
    for (std::int64_t n = 1; n <= n_max; ++n) {
        apply_gates(psi, gates);
        const bool due = n <= n_dense || (n - n_dense) % cfg.stride == 0;
        if (due && !record(n)) {
            break;
        }
    }
    return series;
}

}  // namespace

ObservableSeries run_heating(const HeatingConfig& config, const FloquetCircuit& circuit,
                             const EnsembleManifest& ensemble) {
    if (config.t_max < 0.0) {
        throw std::invalid_argument("run_heating: t_max must be >= 0");
    }
    if (config.stride < 1) {
        throw std::invalid_argument("run_heating: stride must be >= 1");
    }
    if (circuit.num_qubits != config.L) {
        throw std::invalid_argument("run_heating: circuit does not match the config's L");
    }
    if (config.precision == Precision::Single) {
        return run_heating_impl<float>(config, circuit, ensemble);
    }
    return run_heating_impl<double>(config, circuit, ensemble);
}

ObservableSeries run_heating(const HeatingConfig& config) {
    const EnsembleSpec ensemble = build_ensemble(config.seed, config.L - 1);
    const FloquetCircuit circuit = build_circuit(ensemble, config.L, config.omega);
    return run_heating(config, circuit,
                       {ensemble.seed, ensemble.max_bonds, ensemble.content_hash});
}

RateExtraction extract_rate(const ObservableSeries& series) {
    const auto& recs = series.records;
    if (recs.size() < 2) {
        throw NotThermalizedError("extract_rate: series has fewer than two records");
    }
    const double e0 = recs[0].energy;
    if (e0 == 0.0) {
        throw std::invalid_argument("extract_rate: E(0) is zero");
    }

    RateExtraction out;
    double crossings[2] = {0.0, 0.0};
    for (int k = 1; k <= 2; ++k) {
        const double thr = std::exp(-static_cast<double>(k));
        std::size_t j = 0;
        for (std::size_t i = 1; i < recs.size(); ++i) {
            if (recs[i].energy / e0 <= thr) {
                j = i;
                break;
            }
        }
        if (j == 0) {
            std::ostringstream msg;
            msg << "not thermalized: E(t) never crossed E(0) e^-" << k << " within t_max = "
                << recs.back().t;
            throw NotThermalizedError(msg.str());
        }
        for (std::size_t m = j + 1; m < recs.size(); ++m) {
            if (recs[m].energy / e0 > thr) {
                out.non_monotone = true;
                break;
            }
        }
        const double rl = recs[j - 1].energy / e0;
        const double rr = recs[j].energy / e0;
        const double tl = recs[j - 1].t;
        const double tr = recs[j].t;
        double t_cross = tr;
        if (rl != rr) {
            const double frac = (thr - rl) / (rr - rl);
            if (frac >= 1.0) {
                t_cross = tr;  // record sits exactly on the threshold
            } else if (frac <= 0.0) {
                t_cross = tl;
            } else if (tl <= 0.0) {
                t_cross = tl + (tr - tl) * frac;
            } else {
                const double x = std::log(tl) + (std::log(tr) - std::log(tl)) * frac;
                t_cross = std::exp(x);
            }
        }
        crossings[k - 1] = t_cross;
    }
    out.t1 = crossings[0];
    out.t2 = crossings[1];
    if (!(out.t2 > out.t1)) {
        throw NotThermalizedError("extract_rate: degenerate threshold crossing times");
    }
    out.gamma = 1.0 / (out.t2 - out.t1);
    return out;
}

RateFit fit_rates(const std::vector<RatePoint>& points, const std::vector<int>& exclude) {
    std::vector<bool> excluded(points.size(), false);
    for (const int idx : exclude) {
        if (idx < 0 || idx >= static_cast<int>(points.size())) {
            throw std::invalid_argument("fit_rates: exclusion index out of range");
        }
        excluded[static_cast<std::size_t>(idx)] = true;
    }

    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (excluded[i]) {
            continue;
        }
        if (!(points[i].gamma > 0.0)) {
            throw std::invalid_argument("fit_rates: rates must be positive");
        }
        xs.push_back(points[i].omega);
        ys.push_back(std::log(points[i].gamma));
    }
    const std::size_t m = xs.size();
    if (m < 3) {
        throw std::invalid_argument("fit_rates: need at least 3 non-excluded points");
    }

    double xbar = 0.0;
    double ybar = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        xbar += xs[i];
        ybar += ys[i];
    }
    xbar /= static_cast<double>(m);
    ybar /= static_cast<double>(m);

    double sxx = 0.0;
    double sxy = 0.0;
    double tss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
        tss += (ys[i] - ybar) * (ys[i] - ybar);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("fit_rates: all frequencies coincide");
    }

    RateFit fit;
    fit.points = points;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (excluded[i]) {
            fit.excluded.push_back(static_cast<int>(i));
        }
    }
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    for (std::size_t i = 0; i < m; ++i) {
        const double resid = ys[i] - fit.slope * xs[i] - fit.intercept;
        fit.rss += resid * resid;
    }
    const double s2 = fit.rss / static_cast<double>(m - 2);
    fit.slope_se = std::sqrt(s2 / sxx);
    fit.intercept_se =
        std::sqrt(s2 * (1.0 / static_cast<double>(m) + xbar * xbar / sxx));
    fit.r_squared = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;
    return fit;
}

namespace {

template <typename RealT>
void check_norm_drift(const ShardedState<RealT>& psi, const char* where) {
    const double norm = std::sqrt(norm_squared(psi));
    if (std::abs(norm - 1.0) > 1e-2) {
        std::ostringstream msg;
        msg << where << ": norm " << norm << " drifted beyond the 1e-2 guard";
        throw NormDriftError(msg.str());
    }
}

template <typename RealT>
EchoReport run_echo_impl(const EchoConfig& cfg, const FloquetCircuit& circuit, double t_f,
                         std::int64_t periods) {
    ShardLayout layout(cfg.L, cfg.Ng);
    ShardedState<RealT> psi = initial_state<RealT>(circuit, layout);
    const EnergyMoments before = energy_and_variance(psi, circuit);

    const std::vector<GateBlock> forward =
        fuse_layer(period_gates(circuit), cfg.fusion_window);
    const std::vector<GateBlock> backward =
        fuse_layer(period_gates_inverse(circuit), cfg.fusion_window);

    EchoReport report;
    report.t_f = t_f;
    report.periods = periods;
    report.precision = cfg.precision;
    {
        const ShardedState<RealT> psi0 = psi;
        for (std::int64_t p = 0; p < periods; ++p) {
            apply_gates(psi, forward);
            check_norm_drift(psi, "run_echo (forward)");
        }
        for (std::int64_t p = 0; p < periods; ++p) {
            apply_gates(psi, backward);
            check_norm_drift(psi, "run_echo (backward)");
        }
        canonicalize(psi);
        // Normalizing by <psi0|psi0> makes the error vanish identically when
        // the echo returns the state bit-exactly (identity circuit, t_f = 0).
        const std::complex<double> overlap =
            inner_product(psi0, psi) / inner_product(psi0, psi0);
        report.overlap_error = std::abs(1.0 - overlap);
    }
    const EnergyMoments after = energy_and_variance(psi, circuit);
    report.energy_rel_error =
        std::abs(after.energy - before.energy) / std::abs(before.energy);
    report.sigma_rel_error = std::abs(after.sigma - before.sigma) / before.sigma;
    return report;
}

}  // namespace

EchoReport run_echo(const EchoConfig& config, const FloquetCircuit& circuit, double t_f) {
    if (t_f < 0.0) {
        throw std::invalid_argument("run_echo: t_f must be >= 0");
    }
    if (circuit.num_qubits != config.L) {
        throw std::invalid_argument("run_echo: circuit does not match the config's L");
    }
    const double periods_real = t_f / circuit.period;
    const auto periods = static_cast<std::int64_t>(std::llround(periods_real));
    if (std::abs(periods_real - static_cast<double>(periods)) >
        1e-9 * std::max(1.0, periods_real)) {
        throw std::invalid_argument("run_echo: t_f must be a whole number of periods");
    }
    if (config.precision == Precision::Single) {
        return run_echo_impl<float>(config, circuit, t_f, periods);
    }
    return run_echo_impl<double>(config, circuit, t_f, periods);
}

EchoReport run_echo(const EchoConfig& config, double t_f) {
    const EnsembleSpec ensemble = build_ensemble(config.seed, config.L - 1);
    return run_echo(config, build_circuit(ensemble, config.L, config.omega), t_f);
}

namespace {

template <typename RealT>
BenchResult benchmark_period_impl(const BenchConfig& cfg) {
    const EnsembleSpec ensemble = build_ensemble(cfg.seed, cfg.L - 1);
    const FloquetCircuit circuit = build_circuit(ensemble, cfg.L, cfg.omega);
    ShardLayout layout(cfg.L, cfg.Ng);
    ShardedState<RealT> psi = initial_state<RealT>(circuit, layout);
    const std::vector<GateBlock> gates = fuse_layer(period_gates(circuit), cfg.fusion_window);

    for (int warm = 0; warm < 2; ++warm) {
        apply_gates(psi, gates);
    }

    BenchResult result;
    result.config = cfg;
    result.min_s = std::numeric_limits<double>::infinity();
    double total = 0.0;
    using clock = std::chrono::steady_clock;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const auto t0 = clock::now();
        apply_gates(psi, gates);
        const std::chrono::duration<double> dt = clock::now() - t0;
        total += dt.count();
        result.min_s = std::min(result.min_s, dt.count());
        result.max_s = std::max(result.max_s, dt.count());
    }
    result.mean_s = total / cfg.repetitions;
    return result;
}

}  // namespace

BenchResult benchmark_period(const BenchConfig& config) {
    if (config.repetitions < 10) {
        throw std::invalid_argument("benchmark_period: repetitions must be >= 10");
    }
    if (config.precision == Precision::Single) {
        return benchmark_period_impl<float>(config);
    }
    return benchmark_period_impl<double>(config);
}

}  // namespace floq
