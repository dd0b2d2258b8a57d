#include "floq/linalg.hpp"

#include <cmath>
#include <sstream>

namespace floq {

double hermitian_asymmetry(const ComplexMatrix& m) {
    return (m - ComplexMatrix(m.adjoint())).norm();
}

ComplexMatrix sample_gue_bond(SeededRng& rng) {
    ComplexMatrix a(4, 4);
    const double scale = std::sqrt(0.5);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            auto [x, y] = rng.next_normal_pair();
            a(r, c) = std::complex<double>(scale * x, scale * y);
        }
    }
    // (A + A^dagger)/2 is Hermitian bit-exactly: matching off-diagonal sums
    // commute and diagonal imaginary parts cancel.
    ComplexMatrix h = 0.5 * (a + ComplexMatrix(a.adjoint()));
    h -= (h.trace().real() / 4.0) * ComplexMatrix::Identity(4, 4);
    h *= std::sqrt(2.0) / h.norm();
    return h;
}

EigenDecomposition eigh(const ComplexMatrix& h) {
    if (h.rows() != h.cols()) {
        throw std::invalid_argument("eigh: matrix must be square");
    }
    const double scale = h.norm();
    const double asym = hermitian_asymmetry(h);
    if (asym > 1e-10 * scale) {
        std::ostringstream msg;
        msg << "eigh: input is not Hermitian, ||H - H^dag||_F = " << asym
            << " with ||H||_F = " << scale;
        throw NonHermitianError(msg.str(), asym);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eigh: eigensolver did not converge");
    }
    return {solver.eigenvalues(), ComplexMatrix(solver.eigenvectors())};
}

ComplexMatrix expm_unitary(const ComplexMatrix& h, double theta) {
    if (!std::isfinite(theta)) {
        throw std::invalid_argument("expm_unitary: theta must be finite");
    }
    const EigenDecomposition ed = eigh(h);
    const Eigen::Index n = h.rows();
    Eigen::VectorXcd phases(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        phases(j) = std::exp(std::complex<double>(0.0, -ed.eigenvalues(j) * theta));
    }
    return ed.eigenvectors * phases.asDiagonal() * ed.eigenvectors.adjoint();
}

Eigen::VectorXcd ground_state(const ComplexMatrix& h) {
    const EigenDecomposition ed = eigh(h);
    const double gap = ed.eigenvalues(1) - ed.eigenvalues(0);
    if (gap <= 1e-8) {
        std::ostringstream msg;
        msg << "ground_state: near-degenerate ground space, lambda0 = " << ed.eigenvalues(0)
            << ", lambda1 = " << ed.eigenvalues(1);
        throw DegenerateGroundStateError(msg.str(), ed.eigenvalues(0), ed.eigenvalues(1));
    }
    Eigen::VectorXcd v = ed.eigenvectors.col(0);
    Eigen::Index pivot = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        const double mag = std::abs(v(j));
        if (mag > best) {
            best = mag;
            pivot = j;
        }
    }
    v *= std::conj(v(pivot)) / best;
    return v;
}

}  // namespace floq
