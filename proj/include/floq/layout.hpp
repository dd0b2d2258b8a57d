#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace floq {

class LayoutMismatchError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Placement of a 2^L amplitude vector over 2^Ng shards.
///
/// Qubit indices are 1-based and qubit 1 is the most significant bit of the
/// global amplitude index. The first Ng *physical* positions select the shard
/// ("global" positions); the remaining L - Ng index amplitudes within a shard
/// ("local" positions). A logical-to-physical permutation records qubits
/// displaced by deferred global/local swaps; it starts as the identity.
class ShardLayout {
  public:
    ShardLayout(int num_qubits, int num_global)
        : num_qubits_(num_qubits),
          num_global_(num_global),
          physical_of_(static_cast<std::size_t>(num_qubits > 0 ? num_qubits : 0)),
          logical_at_(physical_of_) {
        if (num_qubits < 1 || num_qubits > 48) {
            throw std::invalid_argument("ShardLayout: qubit count out of range");
        }
        if (num_global < 0 || num_global > num_qubits) {
            throw std::invalid_argument("ShardLayout: global qubit count must be in [0, L]");
        }
        std::iota(physical_of_.begin(), physical_of_.end(), 1);
        std::iota(logical_at_.begin(), logical_at_.end(), 1);
    }

    int num_qubits() const { return num_qubits_; }
    int num_global() const { return num_global_; }
    int num_local() const { return num_qubits_ - num_global_; }
    int shard_count() const { return 1 << num_global_; }
    std::uint64_t local_len() const { return std::uint64_t{1} << num_local(); }

    bool is_global_position(int physical_pos) const { return physical_pos <= num_global_; }

    /// Physical position currently holding a logical qubit (both 1-based).
    int physical_of(int logical_qubit) const {
        return physical_of_[static_cast<std::size_t>(logical_qubit - 1)];
    }

    /// Logical qubit currently held at a physical position.
    int logical_at(int physical_pos) const {
        return logical_at_[static_cast<std::size_t>(physical_pos - 1)];
    }

    bool is_canonical() const {
        for (int q = 1; q <= num_qubits_; ++q) {
            if (physical_of(q) != q) return false;
        }
        return true;
    }

    /// Bookkeeping for a physical content swap: the logical qubits held at the
    /// two positions exchange homes.
    void swap_physical(int pos_a, int pos_b) {
        const int qa = logical_at(pos_a);
        const int qb = logical_at(pos_b);
        logical_at_[static_cast<std::size_t>(pos_a - 1)] = qb;
        logical_at_[static_cast<std::size_t>(pos_b - 1)] = qa;
        physical_of_[static_cast<std::size_t>(qa - 1)] = pos_b;
        physical_of_[static_cast<std::size_t>(qb - 1)] = pos_a;
    }

    bool operator==(const ShardLayout&) const = default;

  private:
    int num_qubits_;
    int num_global_;
    std::vector<int> physical_of_;
    std::vector<int> logical_at_;
};

}  // namespace floq
