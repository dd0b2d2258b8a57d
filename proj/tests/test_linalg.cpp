#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "floq/linalg.hpp"
#include "floq/rng.hpp"

using floq::ComplexMatrix;
using floq::SeededRng;

namespace {

ComplexMatrix pauli_x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

ComplexMatrix kron2(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("rng stream is deterministic and counts draws") {
    SeededRng a(12345);
    SeededRng b(12345);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    CHECK(a.draws() == 100);
    SeededRng c(54321);
    CHECK(c.next_u64() != SeededRng(12345).next_u64());
}

TEST_CASE("gue bond is Hermitian, traceless, norm sqrt(2), and reproducible") {
    for (std::uint64_t seed : {1ULL, 7ULL, 99ULL, 123456789ULL}) {
        SeededRng rng(seed);
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        CHECK(rng.draws() == 32);  // documented stream advance
        CHECK(floq::hermitian_asymmetry(h) <= 1e-12);
        CHECK(std::abs(h.trace()) <= 1e-12);
        CHECK(std::abs(h.norm() - std::sqrt(2.0)) <= 1e-12);

        SeededRng rng2(seed);
        const ComplexMatrix h2 = floq::sample_gue_bond(rng2);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                CHECK(h(r, c) == h2(r, c));  // bit-identical
            }
        }
    }
}

TEST_CASE("gue entry means vanish over 1e4 draws (Monte Carlo oracle)") {
    constexpr int kSamples = 10000;
    SeededRng rng(2024);
    double sum_re[16] = {};
    double sum_sq[16] = {};
    for (int s = 0; s < kSamples; ++s) {
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                const double x = h(r, c).real();
                sum_re[4 * r + c] += x;
                sum_sq[4 * r + c] += x * x;
            }
        }
    }
    for (int e = 0; e < 16; ++e) {
        const double mean = sum_re[e] / kSamples;
        const double var = sum_sq[e] / kSamples - mean * mean;
        const double se = std::sqrt(var / kSamples);
        CHECK(std::abs(mean) <= 4.0 * se);
    }
}

TEST_CASE("gue ensemble is invariant under a fixed unitary conjugation") {
    // Eigenvalues of W H W^dag match those of H sample by sample, and the
    // distribution of diagonal entries is unchanged by the conjugation.
    SeededRng wrng(31337);
    const ComplexMatrix w = floq::expm_unitary(floq::sample_gue_bond(wrng), 1.0);

    constexpr int kSamples = 10000;
    SeededRng rng(5150);
    double sum_d = 0.0, sum_d2 = 0.0;
    double sum_c = 0.0, sum_c2 = 0.0;
    for (int s = 0; s < kSamples; ++s) {
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        const ComplexMatrix hc = w * h * ComplexMatrix(w.adjoint());
        const auto eh = floq::eigh(h);
        const auto ehc = floq::eigh(hc);
        for (int j = 0; j < 4; ++j) {
            CHECK(std::abs(eh.eigenvalues(j) - ehc.eigenvalues(j)) <= 1e-8);
        }
        const double d = h(0, 0).real();
        const double c = hc(0, 0).real();
        sum_d += d;
        sum_d2 += d * d;
        sum_c += c;
        sum_c2 += c * c;
    }
    const double mean_d = sum_d / kSamples;
    const double mean_c = sum_c / kSamples;
    const double var_d = sum_d2 / kSamples - mean_d * mean_d;
    const double var_c = sum_c2 / kSamples - mean_c * mean_c;
    const double se_mean = std::sqrt((var_d + var_c) / kSamples);
    CHECK(std::abs(mean_d - mean_c) <= 4.0 * se_mean);
    // Variance of the variance estimate ~ 2 var^2 / N for near-Gaussian data.
    const double se_var = std::sqrt(2.0 * (var_d * var_d + var_c * var_c) / kSamples);
    CHECK(std::abs(var_d - var_c) <= 4.0 * se_var);
}

TEST_CASE("eigh on a diagonal matrix") {
    ComplexMatrix h = ComplexMatrix::Zero(4, 4);
    h(0, 0) = -1.0;
    h(3, 3) = 1.0;
    const auto ed = floq::eigh(h);
    CHECK(ed.eigenvalues(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ed.eigenvalues(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ed.eigenvalues(2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ed.eigenvalues(3) == doctest::Approx(1.0).epsilon(1e-12));
    // Eigenvectors are standard basis vectors up to phase.
    for (int j = 0; j < 4; ++j) {
        int nonzero = 0;
        for (int i = 0; i < 4; ++i) {
            if (std::abs(ed.eigenvectors(i, j)) > 1e-10) {
                ++nonzero;
                CHECK(std::abs(std::abs(ed.eigenvectors(i, j)) - 1.0) <= 1e-12);
            }
        }
        CHECK(nonzero == 1);
    }
}

TEST_CASE("eigh reproduces the sigma_x (x) I spectrum") {
    const ComplexMatrix h = kron2(pauli_x(), ComplexMatrix::Identity(2, 2));
    const auto ed = floq::eigh(h);
    CHECK(ed.eigenvalues(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ed.eigenvalues(1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ed.eigenvalues(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ed.eigenvalues(3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eigh reconstruction residual on random bonds") {
    SeededRng rng(77);
    for (int s = 0; s < 50; ++s) {
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        const auto ed = floq::eigh(h);
        const ComplexMatrix rebuilt = ed.eigenvectors *
                                      ed.eigenvalues.cast<std::complex<double>>().asDiagonal() *
                                      ed.eigenvectors.adjoint();
        CHECK((rebuilt - h).norm() <= 1e-11 * h.norm());
        CHECK((ComplexMatrix(ed.eigenvectors.adjoint()) * ed.eigenvectors -
               ComplexMatrix::Identity(4, 4))
                  .norm() <= 1e-12 * 4);
        for (int j = 1; j < 4; ++j) {
            CHECK(ed.eigenvalues(j) >= ed.eigenvalues(j - 1));
        }
    }
}

TEST_CASE("eigh rejects non-Hermitian input with the asymmetry norm") {
    ComplexMatrix h = ComplexMatrix::Zero(4, 4);
    h(0, 1) = 1.0;  // no conjugate partner
    CHECK_THROWS_AS(floq::eigh(h), floq::NonHermitianError);
    try {
        floq::eigh(h);
    } catch (const floq::NonHermitianError& e) {
        CHECK(e.asymmetry_norm > 0.1);
    }
}

TEST_CASE("expm_unitary of the zero generator is the identity") {
    const ComplexMatrix h = ComplexMatrix::Zero(4, 4);
    const ComplexMatrix u = floq::expm_unitary(h, 2.5);
    CHECK((u - ComplexMatrix::Identity(4, 4)).norm() <= 1e-14);
}

TEST_CASE("expm_unitary of a diagonal generator is the diagonal phase") {
    ComplexMatrix h = ComplexMatrix::Zero(4, 4);
    const double lam[4] = {-1.5, -0.25, 0.5, 2.0};
    for (int i = 0; i < 4; ++i) {
        h(i, i) = lam[i];
    }
    const double theta = 0.8;
    const ComplexMatrix u = floq::expm_unitary(h, theta);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            const std::complex<double> want =
                i == j ? std::exp(std::complex<double>(0.0, -lam[i] * theta)) : 0.0;
            CHECK(std::abs(u(i, j) - want) <= 1e-12);
        }
    }
}

TEST_CASE("expm_unitary agrees with a truncated Taylor series") {
    SeededRng rng(4242);
    const ComplexMatrix h = floq::sample_gue_bond(rng);
    const double theta = 0.3;
    ComplexMatrix taylor = ComplexMatrix::Identity(4, 4);
    ComplexMatrix term = ComplexMatrix::Identity(4, 4);
    const ComplexMatrix step = std::complex<double>(0.0, -theta) * h;
    for (int n = 1; n <= 30; ++n) {
        term = ComplexMatrix(term * step) / static_cast<double>(n);
        taylor += term;
    }
    const ComplexMatrix u = floq::expm_unitary(h, theta);
    CHECK((u - taylor).norm() <= 1e-10);
}

TEST_CASE("expm_unitary output is unitary over 1e3 random generators") {
    SeededRng rng(9001);
    for (int s = 0; s < 1000; ++s) {
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        const double theta = 4.0 * rng.next_uniform() - 2.0;
        const ComplexMatrix u = floq::expm_unitary(h, theta);
        CHECK((ComplexMatrix(u.adjoint()) * u - ComplexMatrix::Identity(4, 4)).norm() <=
              1e-11 * 4);
    }
}

TEST_CASE("expm_unitary satisfies the semigroup property") {
    SeededRng rng(314159);
    for (int s = 0; s < 100; ++s) {
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        const double t1 = 2.0 * rng.next_uniform() - 1.0;
        const double t2 = 2.0 * rng.next_uniform() - 1.0;
        const ComplexMatrix lhs =
            ComplexMatrix(floq::expm_unitary(h, t1) * floq::expm_unitary(h, t2));
        const ComplexMatrix rhs = floq::expm_unitary(h, t1 + t2);
        CHECK((lhs - rhs).norm() <= 1e-10);
    }
}

TEST_CASE("ground_state of a diagonal matrix") {
    ComplexMatrix h = ComplexMatrix::Zero(4, 4);
    h(0, 0) = -1.0;
    h(3, 3) = 1.0;
    const Eigen::VectorXcd v = floq::ground_state(h);
    CHECK(std::abs(v(0) - std::complex<double>(1.0, 0.0)) <= 1e-12);
    for (int i = 1; i < 4; ++i) {
        CHECK(std::abs(v(i)) <= 1e-12);
    }
}

TEST_CASE("ground_state rejects the degenerate -sigma_z (x) sigma_z ground space") {
    ComplexMatrix sz(2, 2);
    sz << 1, 0, 0, -1;
    const ComplexMatrix h = -1.0 * kron2(sz, sz);  // eigenvalues {-1, -1, 1, 1}
    CHECK_THROWS_AS(floq::ground_state(h), floq::DegenerateGroundStateError);
    try {
        floq::ground_state(h);
    } catch (const floq::DegenerateGroundStateError& e) {
        CHECK(e.lambda0 == doctest::Approx(-1.0));
        CHECK(e.lambda1 == doctest::Approx(-1.0));
    }
}

TEST_CASE("ground_state residual and phase convention on random bonds") {
    SeededRng rng(271828);
    for (int s = 0; s < 50; ++s) {
        const ComplexMatrix h = floq::sample_gue_bond(rng);
        const Eigen::VectorXcd v = floq::ground_state(h);
        const double lambda0 = floq::eigh(h).eigenvalues(0);
        CHECK((h * v - lambda0 * v).norm() <= 1e-11);
        CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
        // Largest-magnitude component is real and positive.
        Eigen::Index pivot = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < 4; ++i) {
            if (std::abs(v(i)) > best) {
                best = std::abs(v(i));
                pivot = i;
            }
        }
        CHECK(v(pivot).real() > 0.0);
        CHECK(std::abs(v(pivot).imag()) <= 1e-12);
    }
}
