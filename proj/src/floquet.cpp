#include "floq/floquet.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

namespace floq {

namespace {

void fnv1a_append(std::uint64_t& h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

}  // namespace

std::uint64_t hash_bonds(const std::vector<ComplexMatrix>& bonds) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& b : bonds) {
        for (Eigen::Index r = 0; r < b.rows(); ++r) {
            for (Eigen::Index c = 0; c < b.cols(); ++c) {
                const double re = b(r, c).real();
                const double im = b(r, c).imag();
                fnv1a_append(h, &re, sizeof(re));
                fnv1a_append(h, &im, sizeof(im));
            }
        }
    }
    return h;
}

EnsembleSpec build_ensemble(std::uint64_t seed, int max_bonds) {
    if (max_bonds < 1) {
        throw std::invalid_argument("build_ensemble: max_bonds must be >= 1");
    }
    EnsembleSpec spec;
    spec.seed = seed;
    spec.max_bonds = max_bonds;
    spec.bonds.reserve(static_cast<std::size_t>(max_bonds));
    SeededRng rng(seed);
    for (int k = 0; k < max_bonds; ++k) {
        spec.bonds.push_back(sample_gue_bond(rng));
    }
    spec.content_hash = hash_bonds(spec.bonds);
    return spec;
}

BondNormSplit bond_norm_split(const ComplexMatrix& h) {
    // Pauli expansion h = sum_{a,b} c_ab sigma_a (x) sigma_b; the single-qubit
    // part collects a=0 xor b=0, the interaction part a,b both nonzero.
    static const std::array<Eigen::Matrix2cd, 4> paulis = [] {
        std::array<Eigen::Matrix2cd, 4> p;
        const std::complex<double> i(0.0, 1.0);
        p[0] << 1, 0, 0, 1;
        p[1] << 0, 1, 1, 0;
        p[2] << 0, -i, i, 0;
        p[3] << 1, 0, 0, -1;
        return p;
    }();
    BondNormSplit split;
    double single = 0.0;
    double inter = 0.0;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            if (a == 0 && b == 0) {
                continue;  // traceless by construction
            }
            Eigen::Matrix4cd basis = Eigen::Matrix4cd::Zero();
            for (int r0 = 0; r0 < 2; ++r0)
                for (int c0 = 0; c0 < 2; ++c0)
                    for (int r1 = 0; r1 < 2; ++r1)
                        for (int c1 = 0; c1 < 2; ++c1)
                            basis(2 * r0 + r1, 2 * c0 + c1) =
                                paulis[static_cast<std::size_t>(a)](r0, c0) *
                                paulis[static_cast<std::size_t>(b)](r1, c1);
            const std::complex<double> coeff = (basis.adjoint() * h).trace() / 4.0;
            const double weight = std::norm(coeff) * 4.0;  // ||c * basis||_F^2
            if (a == 0 || b == 0) {
                single += weight;
            } else {
                inter += weight;
            }
        }
    }
    split.single_qubit_norm = std::sqrt(single);
    split.interaction_norm = std::sqrt(inter);
    return split;
}

FloquetCircuit build_circuit(const EnsembleSpec& ensemble, int num_qubits, double omega) {
    if (num_qubits < 2 || num_qubits % 2 != 0) {
        throw std::invalid_argument("build_circuit: L must be even and >= 2");
    }
    if (num_qubits - 1 > static_cast<int>(ensemble.bonds.size())) {
        std::ostringstream msg;
        msg << "build_circuit: L = " << num_qubits << " needs " << num_qubits - 1
            << " bonds but the ensemble holds " << ensemble.bonds.size();
        throw std::invalid_argument(msg.str());
    }
    if (!(omega > 0.0)) {
        throw std::invalid_argument("build_circuit: omega must be positive");
    }

    FloquetCircuit circuit;
    circuit.num_qubits = num_qubits;
    circuit.omega = omega;
    circuit.period = 2.0 * std::numbers::pi / omega;
    for (int k = 1; k <= num_qubits - 1; ++k) {
        circuit.bonds.push_back({k, ensemble.bonds[static_cast<std::size_t>(k - 1)]});
    }
    for (int k = 2; k <= num_qubits - 2; k += 2) {
        circuit.even_layer.emplace_back(
            std::vector<int>{k, k + 1},
            expm_unitary(circuit.bonds[static_cast<std::size_t>(k - 1)].matrix,
                         circuit.period));
    }
    for (int k = 1; k <= num_qubits - 1; k += 2) {
        circuit.odd_layer.emplace_back(
            std::vector<int>{k, k + 1},
            expm_unitary(circuit.bonds[static_cast<std::size_t>(k - 1)].matrix,
                         circuit.period));
    }
    return circuit;
}

std::vector<GateBlock> period_gates(const FloquetCircuit& circuit) {
    std::vector<GateBlock> gates;
    gates.reserve(circuit.even_layer.size() + circuit.odd_layer.size());
    gates.insert(gates.end(), circuit.even_layer.begin(), circuit.even_layer.end());
    gates.insert(gates.end(), circuit.odd_layer.begin(), circuit.odd_layer.end());
    return gates;
}

std::vector<GateBlock> period_gates_inverse(const FloquetCircuit& circuit) {
    std::vector<GateBlock> gates;
    gates.reserve(circuit.even_layer.size() + circuit.odd_layer.size());
    for (const auto& g : circuit.odd_layer) {
        gates.push_back(g.adjoint());
    }
    for (const auto& g : circuit.even_layer) {
        gates.push_back(g.adjoint());
    }
    return gates;
}

template <typename RealT>
ShardedState<RealT> initial_state(const FloquetCircuit& circuit, const ShardLayout& layout,
                                  std::shared_ptr<WorkerPool> pool) {
    if (layout.num_qubits() != circuit.num_qubits) {
        throw LayoutMismatchError("initial_state: layout and circuit disagree on L");
    }
    std::vector<Eigen::Vector4cd> factors;
    factors.reserve(static_cast<std::size_t>(circuit.num_qubits / 2));
    for (int k = 1; k <= circuit.num_qubits - 1; k += 2) {
        factors.push_back(ground_state(circuit.bonds[static_cast<std::size_t>(k - 1)].matrix));
    }
    return make_product_state<RealT>(layout, factors, std::move(pool));
}

template <typename RealT>
ShardedState<RealT> apply_hbar(const ShardedState<RealT>& psi, const FloquetCircuit& circuit) {
    ShardedState<RealT> phi(psi.layout(), psi.pool_ptr());
    ShardedState<RealT> scratch = psi;
    for (std::size_t k = 0; k < circuit.bonds.size(); ++k) {
        if (k > 0) {
            scratch = psi;
        }
        const auto& bond = circuit.bonds[k];
        apply_gate(scratch, GateBlock({bond.bond, bond.bond + 1}, bond.matrix, false),
                   RestorePolicy::Immediate);
        axpy(phi, 1.0, scratch);
    }
    return phi;
}

template <typename RealT>
EnergyMoments energy_and_variance(const ShardedState<RealT>& psi,
                                  const FloquetCircuit& circuit) {
    const double norm = std::sqrt(norm_squared(psi));
    if (std::abs(norm - 1.0) > 1e-4) {
        std::ostringstream msg;
        msg << "energy_and_variance: state norm " << norm << " deviates from 1 beyond 1e-4";
        throw std::domain_error(msg.str());
    }
    const ShardedState<RealT> phi = apply_hbar(psi, circuit);
    EnergyMoments m;
    m.energy = inner_product(psi, phi).real();
    const double second = inner_product(phi, phi).real();
    const double variance = second - m.energy * m.energy;
    m.clamped = variance < 0.0;
    m.sigma = std::sqrt(std::max(0.0, variance));
    return m;
}

#define FLOQ_INSTANTIATE(RealT)                                                            \
    template ShardedState<RealT> initial_state<RealT>(const FloquetCircuit&,               \
                                                      const ShardLayout&,                 \
                                                      std::shared_ptr<WorkerPool>);       \
    template ShardedState<RealT> apply_hbar<RealT>(const ShardedState<RealT>&,             \
                                                   const FloquetCircuit&);                \
    template EnergyMoments energy_and_variance<RealT>(const ShardedState<RealT>&,          \
                                                      const FloquetCircuit&);

FLOQ_INSTANTIATE(float)
FLOQ_INSTANTIATE(double)

#undef FLOQ_INSTANTIATE

}  // namespace floq
