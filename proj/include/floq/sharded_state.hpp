#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <utility>
#include <vector>

#include "floq/layout.hpp"
#include "floq/linalg.hpp"
#include "floq/worker_pool.hpp"

namespace floq {

enum class Precision : std::uint32_t { Single = 1, Double = 2 };

template <typename RealT>
constexpr Precision precision_of() {
    if constexpr (sizeof(RealT) == sizeof(float)) {
        return Precision::Single;
    } else {
        return Precision::Double;
    }
}

/// A dense operator on an ordered list of qubits. The first target supplies
/// the most significant bit of the matrix index, so a gate on targets (a, b)
/// with matrix U_a (x) U_b acts as U_a on a and U_b on b. Matrices are stored
/// in double precision; kernels cast once per application.
struct GateBlock {
    std::vector<int> targets;  // 1-based logical qubits
    ComplexMatrix matrix;      // 2^q x 2^q
    bool unitary = true;

    GateBlock(std::vector<int> targets_, ComplexMatrix matrix_, bool unitary_ = true);

    int arity() const { return static_cast<int>(targets.size()); }
    GateBlock adjoint() const { return {targets, ComplexMatrix(matrix.adjoint()), unitary}; }
};

/// Whether apply_gate leaves qubits where a global/local swap put them
/// (deferred restore, the default) or swaps them back afterwards.
enum class RestorePolicy { Defer, Immediate };

/// The 2^L amplitude vector partitioned over 2^Ng shards by global-qubit
/// prefix. Shard s holds the amplitudes whose first Ng physical bits equal s.
/// All workers of the attached pool operate shard s = worker id.
template <typename RealT>
class ShardedState {
  public:
    using Real = RealT;
    using Complex = std::complex<RealT>;

    explicit ShardedState(ShardLayout layout, std::shared_ptr<WorkerPool> pool = nullptr);

    ShardedState(const ShardedState& other);
    ShardedState& operator=(const ShardedState& other);
    ShardedState(ShardedState&&) noexcept = default;
    ShardedState& operator=(ShardedState&&) noexcept = default;

    const ShardLayout& layout() const { return layout_; }
    ShardLayout& layout() { return layout_; }
    WorkerPool& pool() const { return *pool_; }
    std::shared_ptr<WorkerPool> pool_ptr() const { return pool_; }

    std::vector<Complex>& shard(int s) { return shards_[static_cast<std::size_t>(s)]; }
    const std::vector<Complex>& shard(int s) const {
        return shards_[static_cast<std::size_t>(s)];
    }

    void fill_zero();

    /// Per-worker exchange buffer (bounded send/receive chunks), lazily sized.
    std::vector<Complex>& swap_buffer(int s);

    static constexpr Precision precision() { return precision_of<RealT>(); }

  private:
    ShardLayout layout_;
    std::shared_ptr<WorkerPool> pool_;
    std::vector<std::vector<Complex>> shards_;
    std::vector<std::vector<Complex>> swap_buffers_;
};

/// Amplitude 1 on the given computational basis state ("bits" is b1...bL,
/// qubit 1 first), 0 elsewhere.
template <typename RealT>
ShardedState<RealT> make_basis_state(const ShardLayout& layout, std::string_view bits,
                                     std::shared_ptr<WorkerPool> pool = nullptr);

/// Product of unit-norm two-qubit factors on pairs (1,2), (3,4), ..., (L-1,L).
template <typename RealT>
ShardedState<RealT> make_product_state(const ShardLayout& layout,
                                       const std::vector<Eigen::Vector4cd>& pair_factors,
                                       std::shared_ptr<WorkerPool> pool = nullptr);

/// Applies a gate to its logical targets. Targets currently living on global
/// positions are first exchanged with free local positions via
/// swap_global_local; with RestorePolicy::Defer the exchanged layout is kept.
template <typename RealT>
void apply_gate(ShardedState<RealT>& state, const GateBlock& gate,
                RestorePolicy policy = RestorePolicy::Defer);

template <typename RealT>
void apply_gates(ShardedState<RealT>& state, const std::vector<GateBlock>& gates,
                 RestorePolicy policy = RestorePolicy::Defer);

/// Collective: the listed physical positions exchange global/local roles.
/// Each pair must name one global and one local position; pairs are disjoint.
/// Pure data movement; the logical state is unchanged.
template <typename RealT>
void swap_global_local(ShardedState<RealT>& state,
                       const std::vector<std::pair<int, int>>& pairs);

/// Restores the identity logical-to-physical ordering.
template <typename RealT>
void canonicalize(ShardedState<RealT>& state);

/// <psi|phi> as per-shard partial sums (double-precision accumulation, fixed
/// ascending index order) followed by a deterministic all-reduce.
template <typename RealT>
std::complex<double> inner_product(const ShardedState<RealT>& psi,
                                   const ShardedState<RealT>& phi);

template <typename RealT>
double norm_squared(const ShardedState<RealT>& psi);

/// out += alpha * in, shard-wise, no communication.
template <typename RealT>
void axpy(ShardedState<RealT>& out, std::complex<double> alpha, const ShardedState<RealT>& in);

/// Multiplies gates that fit inside a contiguous qubit window of at most
/// `window` qubits into single blocks, preserving application order. A window
/// of 2 disables fusion and returns the input unchanged.
std::vector<GateBlock> fuse_layer(const std::vector<GateBlock>& gates, int window);

/// All 2^L amplitudes in canonical logical order (bitstring b1...bL read as an
/// integer with b1 most significant). Does not move data.
template <typename RealT>
std::vector<std::complex<RealT>> dump_logical_amplitudes(const ShardedState<RealT>& state);

/// Debug dump: little-endian binary, header (L: u32, Ng: u32, precision tag:
/// u32 with 1 = single, 2 = double), then 2^L complex amplitudes in canonical
/// logical order at the state's native precision.
template <typename RealT>
void write_amplitude_dump(const ShardedState<RealT>& state, const std::filesystem::path& path);

struct AmplitudeDump {
    int num_qubits = 0;
    int num_global = 0;
    Precision precision = Precision::Single;
    std::vector<std::complex<double>> amplitudes;
};

AmplitudeDump read_amplitude_dump(const std::filesystem::path& path);

}  // namespace floq
