#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "floq/experiment.hpp"
#include "test_util.hpp"

using floq::EchoConfig;
using floq::HeatingConfig;
using floq::ObservableSeries;
using floq::Precision;
using floq::RatePoint;
using floq::SeriesRecord;

namespace {

// Synthetic decay sampled on the paper's dense-then-strided schedule (T = 1).
ObservableSeries synthetic_series(double e0, double gamma, double t_max,
                                  double t_dense = 100.0, int stride = 10) {
    ObservableSeries s;
    s.config.L = 2;
    s.config.omega = 2.0 * std::numbers::pi;  // T = 1
    s.config.t_max = t_max;
    s.config.t_dense = t_dense;
    s.config.stride = stride;
    const auto n_max = static_cast<std::int64_t>(t_max);
    const auto n_dense = static_cast<std::int64_t>(t_dense);
    for (std::int64_t n = 0; n <= n_max; ++n) {
        if (n > n_dense && (n - n_dense) % stride != 0) {
            continue;
        }
        const double t = static_cast<double>(n);
        s.records.push_back({n, t, e0 * std::exp(-gamma * t), 0.0, 1.0, n});
    }
    return s;
}

}  // namespace

TEST_CASE("t_max = 0 yields exactly the t = 0 record") {
    HeatingConfig cfg;
    cfg.L = 6;
    cfg.Ng = 1;
    cfg.seed = 11;
    cfg.omega = 4.0;
    cfg.t_max = 0.0;
    const auto series = floq::run_heating(cfg);
    REQUIRE(series.records.size() == 1);
    CHECK(series.records[0].n == 0);
    CHECK(series.records[0].t == 0.0);
    CHECK(series.records[0].gates == 0);
    CHECK_FALSE(series.aborted);

    // E(0) equals the initial-state energy measured directly.
    const auto ensemble = floq::build_ensemble(cfg.seed, cfg.L - 1);
    const auto circuit = floq::build_circuit(ensemble, cfg.L, cfg.omega);
    floq::ShardLayout layout(cfg.L, cfg.Ng);
    auto psi = floq::initial_state<float>(circuit, layout);
    const auto m = floq::energy_and_variance(psi, circuit);
    CHECK(series.records[0].energy == m.energy);
}

TEST_CASE("record schedule: dense every period, then every stride-th") {
    HeatingConfig cfg;
    cfg.L = 4;
    cfg.Ng = 0;
    cfg.seed = 3;
    cfg.omega = 2.0 * std::numbers::pi;  // T = 1
    cfg.t_dense = 10.0;
    cfg.stride = 3;
    cfg.t_max = 40.0;
    const auto series = floq::run_heating(cfg);
    // floor(t_dense/T) + floor((t_max - t_dense)/(stride T)) + 1
    CHECK(series.records.size() == 10 + 10 + 1);
    for (std::size_t i = 0; i < series.records.size(); ++i) {
        const auto& r = series.records[i];
        CHECK(r.gates == (cfg.L - 1) * r.n);
        CHECK(r.t == doctest::Approx(static_cast<double>(r.n)).epsilon(1e-12));
        if (i > 0) {
            CHECK(r.t > series.records[i - 1].t);
        }
        if (r.n <= 10) {
            CHECK(r.n == static_cast<std::int64_t>(i));
        } else {
            CHECK((r.n - 10) % 3 == 0);
        }
    }
}

TEST_CASE("gate count formula reproduces the L = 34 datum") {
    // g = (L-1) t / T with T = 2 pi / omega: 33 * 1e5 * 8 / (2 pi) = 4.2e6.
    const double g = 33.0 * 1e5 * 8.0 / (2.0 * std::numbers::pi);
    CHECK(g >= 4.15e6);
    CHECK(g <= 4.25e6);
}

TEST_CASE("fast drive heats to the infinite-temperature values") {
    HeatingConfig cfg;
    cfg.L = 10;
    cfg.Ng = 0;
    cfg.seed = 1;
    cfg.omega = 2.0;
    cfg.t_max = 1e3;
    const auto series = floq::run_heating(cfg);
    REQUIRE(series.records.size() > 10);
    const double e0 = series.records.front().energy;
    const double ef = series.records.back().energy;
    CHECK(std::abs(ef) <= 0.05 * std::abs(e0));

    const auto ensemble = floq::build_ensemble(cfg.seed, cfg.L - 1);
    const auto circuit = floq::build_circuit(ensemble, cfg.L, cfg.omega);
    const double sigma_inf =
        std::sqrt(dense::hbar_trace_sq(circuit) / std::pow(2.0, cfg.L));
    CHECK(std::abs(series.records.back().sigma - sigma_inf) <= 0.10 * sigma_inf);
}

TEST_CASE("run_heating is deterministic") {
    HeatingConfig cfg;
    cfg.L = 8;
    cfg.Ng = 2;
    cfg.seed = 7;
    cfg.omega = 3.0;
    cfg.t_max = 50.0;
    const auto a = floq::run_heating(cfg);
    const auto b = floq::run_heating(cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i] == b.records[i]);  // bit-identical doubles
    }
    CHECK(a.ensemble == b.ensemble);
}

TEST_CASE("norm blow-up aborts with the last valid record") {
    // A non-unitary "circuit" that inflates the norm by ~1.2% per period.
    const auto ensemble = floq::build_ensemble(5, 3);
    auto circuit = floq::build_circuit(ensemble, 4, 2.0 * std::numbers::pi);
    for (auto* layer : {&circuit.even_layer, &circuit.odd_layer}) {
        for (auto& g : *layer) {
            g = floq::GateBlock(g.targets, 1.004 * g.matrix, false);
        }
    }
    HeatingConfig cfg;
    cfg.L = 4;
    cfg.Ng = 0;
    cfg.seed = 5;
    cfg.omega = 2.0 * std::numbers::pi;
    cfg.t_max = 500.0;
    cfg.precision = Precision::Double;
    const auto series =
        floq::run_heating(cfg, circuit, {ensemble.seed, ensemble.max_bonds, 0});
    CHECK(series.aborted);
    REQUIRE(!series.records.empty());
    CHECK(series.records.size() < 30);  // three gates at +0.4% reach 1e-2 quickly
    for (const auto& r : series.records) {
        CHECK(std::abs(r.norm - 1.0) <= 1e-2);
    }
}

TEST_CASE("extract_rate recovers a pure exponential within 1 percent") {
    const auto series = synthetic_series(3.0, 0.01, 2000.0);
    const auto rate = floq::extract_rate(series);
    CHECK(std::abs(rate.gamma - 0.01) <= 1e-4);
    CHECK(rate.t1 < rate.t2);
    CHECK_FALSE(rate.non_monotone);

    // Negative E(0) works identically through the ratio.
    const auto neg = synthetic_series(-3.0, 0.01, 2000.0);
    CHECK(floq::extract_rate(neg).gamma == rate.gamma);
}

TEST_CASE("extract_rate is exact when records hit the thresholds") {
    // gamma = 1/64 puts both crossings on records with bit-exact ratios.
    const auto series = synthetic_series(2.0, 1.0 / 64.0, 300.0, 200.0);
    const auto rate = floq::extract_rate(series);
    CHECK(rate.t1 == 64.0);
    CHECK(rate.t2 == 128.0);
    CHECK(rate.gamma == 1.0 / 64.0);
}

TEST_CASE("extract_rate is invariant under uniform energy rescaling") {
    auto series = synthetic_series(1.7, 0.02, 1500.0);
    const auto base = floq::extract_rate(series);

    auto exact = series;
    for (auto& r : exact.records) {
        r.energy *= -8.0;  // power of two: the ratios are bit-identical
    }
    const auto scaled = floq::extract_rate(exact);
    CHECK(base.gamma == scaled.gamma);
    CHECK(base.t1 == scaled.t1);
    CHECK(base.t2 == scaled.t2);

    auto general = series;
    for (auto& r : general.records) {
        r.energy *= -7.25;
    }
    const auto approx = floq::extract_rate(general);
    CHECK(std::abs(approx.gamma - base.gamma) <= 1e-9 * base.gamma);
}

TEST_CASE("extract_rate reports non-thermalized series") {
    // Decays only to half the initial energy.
    ObservableSeries s = synthetic_series(1.0, 0.0, 0.0);
    s.records.clear();
    for (int n = 0; n <= 100; ++n) {
        const double t = n;
        s.records.push_back({n, t, 0.5 + 0.5 * std::exp(-0.05 * t), 0.0, 1.0, n});
    }
    CHECK_THROWS_AS(floq::extract_rate(s), floq::NotThermalizedError);
}

TEST_CASE("extract_rate flags non-monotone crossings and uses the first") {
    ObservableSeries s;
    s.config.omega = 2.0 * std::numbers::pi;
    const double ts[] = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    const double es[] = {1.0, 0.5, 0.30, 0.40, 0.25, 0.10, 0.05};
    for (int i = 0; i < 7; ++i) {
        s.records.push_back({i, ts[i], es[i], 0.0, 1.0, i});
    }
    const auto rate = floq::extract_rate(s);
    CHECK(rate.non_monotone);
    CHECK(rate.t1 < 2.0);  // first e^-1 crossing is in (1, 2), not after the bump
}

TEST_CASE("extract_rate agrees between single and double precision runs") {
    HeatingConfig cfg;
    cfg.L = 10;
    cfg.Ng = 0;
    cfg.seed = 1;
    cfg.omega = 2.0;
    cfg.t_max = 300.0;
    const auto single_rate = floq::extract_rate(floq::run_heating(cfg));
    cfg.precision = Precision::Double;
    const auto double_rate = floq::extract_rate(floq::run_heating(cfg));
    CHECK(std::abs(single_rate.gamma - double_rate.gamma) <= 0.05 * double_rate.gamma);
}

TEST_CASE("fit_rates recovers exact linear data to machine precision") {
    std::vector<RatePoint> points;
    for (const double w : {1.0, 2.0, 3.0, 4.0, 5.0}) {
        points.push_back({w, std::exp(-2.0 * w + 5.0)});
    }
    const auto fit = floq::fit_rates(points, {});
    CHECK(std::abs(fit.slope + 2.0) <= 1e-12);
    CHECK(std::abs(fit.intercept - 5.0) <= 1e-12);
    CHECK(fit.rss <= 1e-24);
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.slope_se <= 1e-12);
}

TEST_CASE("fit_rates exclusion equals fitting the remaining points") {
    std::vector<RatePoint> points = {{1.0, std::exp(3.0)},
                                     {2.0, std::exp(1.0)},
                                     {3.0, std::exp(-1.0)},
                                     {4.0, std::exp(-3.5)},
                                     {5.0, 40.0}};  // outlier
    const auto with_exclusion = floq::fit_rates(points, {4});
    const std::vector<RatePoint> trimmed(points.begin(), points.end() - 1);
    const auto direct = floq::fit_rates(trimmed, {});
    CHECK(with_exclusion.slope == direct.slope);
    CHECK(with_exclusion.intercept == direct.intercept);
    CHECK(with_exclusion.excluded == std::vector<int>{4});

    CHECK_THROWS_AS(floq::fit_rates({{1.0, 0.5}, {2.0, 0.1}}, {}), std::invalid_argument);
    CHECK_THROWS_AS(floq::fit_rates(points, {0, 1, 2}), std::invalid_argument);
    std::vector<RatePoint> bad = {{1.0, 0.5}, {2.0, 0.1}, {3.0, -0.2}};
    CHECK_THROWS_AS(floq::fit_rates(bad, {}), std::invalid_argument);
}

TEST_CASE("echo with t_f = 0 has exactly zero overlap error") {
    EchoConfig cfg;
    cfg.L = 6;
    cfg.Ng = 1;
    cfg.seed = 9;
    cfg.omega = 8.0;
    const auto report = floq::run_echo(cfg, 0.0);
    CHECK(report.overlap_error == 0.0);
    CHECK(report.periods == 0);
    CHECK(report.energy_rel_error == 0.0);

    CHECK_THROWS_AS(floq::run_echo(cfg, 0.37), std::invalid_argument);
}

TEST_CASE("echo through an identity circuit is exact for any t_f") {
    const auto ensemble = floq::build_ensemble(4, 7);
    auto circuit = floq::build_circuit(ensemble, 8, 8.0);
    for (auto* layer : {&circuit.even_layer, &circuit.odd_layer}) {
        for (auto& g : *layer) {
            g = floq::GateBlock(g.targets, floq::ComplexMatrix::Identity(4, 4));
        }
    }
    EchoConfig cfg;
    cfg.L = 8;
    cfg.Ng = 2;
    cfg.seed = 4;
    cfg.omega = 8.0;
    const auto report = floq::run_echo(cfg, circuit, 25.0 * circuit.period);
    CHECK(report.overlap_error == 0.0);
}

TEST_CASE("double-precision echo error stays below 1e-10") {
    EchoConfig cfg;
    cfg.L = 10;
    cfg.Ng = 0;
    cfg.seed = 1;
    cfg.omega = 8.0;
    cfg.precision = Precision::Double;
    const double period = 2.0 * std::numbers::pi / cfg.omega;
    const auto report = floq::run_echo(cfg, 100.0 * period);
    CHECK(report.overlap_error <= 1e-10);
    CHECK(report.energy_rel_error <= 1e-9);
}

TEST_CASE("single-precision echo error sits near the expected 1e-7 scale") {
    EchoConfig cfg;
    cfg.L = 10;
    cfg.Ng = 0;
    cfg.seed = 1;
    cfg.omega = 8.0;
    const double period = 2.0 * std::numbers::pi / cfg.omega;
    const auto report = floq::run_echo(cfg, 10.0 * period);
    CHECK(report.overlap_error <= 1e-6);
    CHECK(report.overlap_error >= 1e-9);
}

TEST_CASE("benchmark reports mean within min and max") {
    floq::BenchConfig cfg;
    cfg.L = 8;
    cfg.Ng = 0;
    cfg.repetitions = 10;
    const auto result = floq::benchmark_period(cfg);
    CHECK(result.min_s > 0.0);
    CHECK(result.min_s <= result.mean_s);
    CHECK(result.mean_s <= result.max_s);

    cfg.repetitions = 5;
    CHECK_THROWS_AS(floq::benchmark_period(cfg), std::invalid_argument);
}
