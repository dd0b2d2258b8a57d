#pragma once

#include <cstdint>
#include <vector>

#include "floq/linalg.hpp"
#include "floq/sharded_state.hpp"

namespace floq {

/// Two-qubit Hamiltonian on bond k, acting on qubits (k, k+1). Traceless with
/// Frobenius norm sqrt(2); that norm is the microscopic energy unit.
struct BondHamiltonian {
    int bond = 0;
    ComplexMatrix matrix;
};

/// One deterministic draw of the random-bond ensemble. The bond list for a
/// chain of L qubits is the exact prefix (first L-1 entries) of the list for
/// any longer chain built from the same seed.
struct EnsembleSpec {
    std::uint64_t seed = 0;
    int max_bonds = 0;
    std::vector<ComplexMatrix> bonds;
    std::uint64_t content_hash = 0;
};

EnsembleSpec build_ensemble(std::uint64_t seed, int max_bonds);

/// FNV-1a over the row-major (re, im) doubles of every bond, in order.
std::uint64_t hash_bonds(const std::vector<ComplexMatrix>& bonds);

/// Norms of the noninteracting (single-qubit) and interacting parts of a bond
/// Hamiltonian. Diagnostic only; no sample is ever rejected.
struct BondNormSplit {
    double single_qubit_norm = 0.0;
    double interaction_norm = 0.0;
};

BondNormSplit bond_norm_split(const ComplexMatrix& h);

/// The two-layer drive: one period applies every even-bond gate, then every
/// odd-bond gate. Gate k is exp(-i H_k T) with T = 2 pi / omega.
struct FloquetCircuit {
    int num_qubits = 0;
    double period = 0.0;
    double omega = 0.0;
    std::vector<GateBlock> even_layer;  // bonds 2, 4, ..., L-2
    std::vector<GateBlock> odd_layer;   // bonds 1, 3, ..., L-1
    std::vector<BondHamiltonian> bonds;
};

FloquetCircuit build_circuit(const EnsembleSpec& ensemble, int num_qubits, double omega);

/// Gates of one period in application order (even layer first).
std::vector<GateBlock> period_gates(const FloquetCircuit& circuit);

/// Gates of one inverse period: layer order reversed, every gate adjointed.
std::vector<GateBlock> period_gates_inverse(const FloquetCircuit& circuit);

/// Ground state of the odd-bond Hamiltonian: the tensor product of the
/// two-qubit ground states on pairs (1,2), (3,4), ...
template <typename RealT>
ShardedState<RealT> initial_state(const FloquetCircuit& circuit, const ShardLayout& layout,
                                  std::shared_ptr<WorkerPool> pool = nullptr);

/// phi = sum_k H_k psi, accumulated bond by bond through the gate kernel with
/// the unitary check disabled. Uses two scratch states; psi is unmodified.
template <typename RealT>
ShardedState<RealT> apply_hbar(const ShardedState<RealT>& psi, const FloquetCircuit& circuit);

struct EnergyMoments {
    double energy = 0.0;
    double sigma = 0.0;
    bool clamped = false;  // variance fell below zero and was clamped
};

/// E = Re<psi|Hbar psi>, sigma = sqrt(max(0, <Hbar psi|Hbar psi> - E^2)).
/// Requires | ||psi|| - 1 | <= 1e-4.
template <typename RealT>
EnergyMoments energy_and_variance(const ShardedState<RealT>& psi,
                                  const FloquetCircuit& circuit);

}  // namespace floq
