#pragma once

// Shared helpers for moving states between the sharded engine and the dense
// reference vectors.

#include <cmath>
#include <complex>

#include "dense_reference.hpp"
#include "floq/rng.hpp"
#include "floq/sharded_state.hpp"

namespace testutil {

template <typename RealT>
dense::cvec to_dense(const floq::ShardedState<RealT>& state) {
    const auto amps = floq::dump_logical_amplitudes(state);
    dense::cvec out(amps.size());
    for (std::size_t i = 0; i < amps.size(); ++i) {
        out[i] = std::complex<double>(amps[i].real(), amps[i].imag());
    }
    return out;
}

// Fills shards directly from a dense logical vector; the layout must be
// canonical so physical and logical indices coincide.
template <typename RealT>
floq::ShardedState<RealT> from_dense(const floq::ShardLayout& layout, const dense::cvec& v,
                                     std::shared_ptr<floq::WorkerPool> pool = nullptr) {
    floq::ShardedState<RealT> state(layout, std::move(pool));
    const int num_local = layout.num_local();
    for (int s = 0; s < layout.shard_count(); ++s) {
        auto& amps = state.shard(s);
        const std::uint64_t base = static_cast<std::uint64_t>(s) << num_local;
        for (std::uint64_t i = 0; i < amps.size(); ++i) {
            const auto z = v[base | i];
            amps[i] = std::complex<RealT>(static_cast<RealT>(z.real()),
                                          static_cast<RealT>(z.imag()));
        }
    }
    return state;
}

template <typename RealT>
floq::ShardedState<RealT> random_state(const floq::ShardLayout& layout, std::uint64_t seed,
                                       bool normalized = true,
                                       std::shared_ptr<floq::WorkerPool> pool = nullptr) {
    floq::SeededRng rng(seed);
    dense::cvec v(std::uint64_t{1} << layout.num_qubits());
    double norm2 = 0.0;
    for (auto& z : v) {
        auto [x, y] = rng.next_normal_pair();
        z = {x, y};
        norm2 += std::norm(z);
    }
    if (normalized) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& z : v) {
            z *= inv;
        }
    }
    return from_dense<RealT>(layout, v, std::move(pool));
}

inline floq::GateBlock random_two_qubit_gate(floq::SeededRng& rng, int a, int b,
                                             double theta = 0.7) {
    return {{a, b}, floq::expm_unitary(floq::sample_gue_bond(rng), theta)};
}

}  // namespace testutil
