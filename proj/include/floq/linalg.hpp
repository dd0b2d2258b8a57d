#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "floq/rng.hpp"

namespace floq {

/// Dense complex matrix in row-major order. Everything in this header runs
/// in double precision regardless of the simulation precision: these objects
/// are O(1)-sized and feed state preparation and gate construction.
using ComplexMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;  // ascending
    ComplexMatrix eigenvectors;   // unitary, columns are eigenvectors
};

class NonHermitianError : public std::invalid_argument {
  public:
    NonHermitianError(const std::string& msg, double asymmetry)
        : std::invalid_argument(msg), asymmetry_norm(asymmetry) {}
    double asymmetry_norm;
};

class DegenerateGroundStateError : public std::runtime_error {
  public:
    DegenerateGroundStateError(const std::string& msg, double l0, double l1)
        : std::runtime_error(msg), lambda0(l0), lambda1(l1) {}
    double lambda0;
    double lambda1;
};

/// ||M - M^dagger||_F
double hermitian_asymmetry(const ComplexMatrix& m);

/// Random 4x4 bond Hamiltonian: draw A with i.i.d. standard complex Gaussian
/// entries (real and imaginary parts each N(0, 1/2), row-major entry order),
/// take (A + A^dagger)/2, shift traceless, rescale to Frobenius norm sqrt(2).
/// Advances the rng stream by exactly 32 draws (one Box-Muller pair per entry).
ComplexMatrix sample_gue_bond(SeededRng& rng);

/// Hermitian eigendecomposition with ascending eigenvalues. Rejects inputs
/// with ||H - H^dagger||_F > 1e-10 * ||H||_F.
EigenDecomposition eigh(const ComplexMatrix& h);

/// U = V diag(exp(-i lambda_j theta)) V^dagger for Hermitian H.
ComplexMatrix expm_unitary(const ComplexMatrix& h, double theta);

/// Unit-norm eigenvector of the minimum eigenvalue. The phase is fixed so the
/// largest-magnitude component is real and positive (ties on magnitude break
/// toward the lowest index). Requires a spectral gap above 1e-8.
Eigen::VectorXcd ground_state(const ComplexMatrix& h);

}  // namespace floq
