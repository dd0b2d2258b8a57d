#include "floq/sharded_state.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace floq {

namespace {

// Swap collectives stream through bounded per-worker buffers so exchange
// scratch never rivals the wavefunction itself (2^20 amplitudes per side).
constexpr std::uint64_t kSwapChunk = std::uint64_t{1} << 20;

// Inserts a zero bit at each listed position (positions ascending, counted in
// the final index).
std::uint64_t insert_zero_bits(std::uint64_t idx, const std::vector<int>& sorted_bits) {
    for (const int b : sorted_bits) {
        idx = ((idx >> b) << (b + 1)) | (idx & ((std::uint64_t{1} << b) - 1));
    }
    return idx;
}

std::uint64_t insert_bit(std::uint64_t idx, int bit, std::uint64_t value) {
    return ((idx >> bit) << (bit + 1)) | (value << bit) | (idx & ((std::uint64_t{1} << bit) - 1));
}

std::shared_ptr<WorkerPool> pool_for(const ShardLayout& layout,
                                     std::shared_ptr<WorkerPool> pool) {
    if (pool) {
        if (pool->size() != layout.shard_count()) {
            throw LayoutMismatchError("worker pool size must equal the shard count");
        }
        return pool;
    }
    return std::make_shared<WorkerPool>(layout.shard_count());
}

}  // namespace

// ---------------------------------------------------------------------------
// GateBlock

GateBlock::GateBlock(std::vector<int> targets_, ComplexMatrix matrix_, bool unitary_)
    : targets(std::move(targets_)), matrix(std::move(matrix_)), unitary(unitary_) {
    if (targets.empty() || targets.size() > 20) {
        throw std::invalid_argument("GateBlock: target count out of range");
    }
    std::vector<int> sorted = targets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("GateBlock: duplicate targets");
    }
    if (sorted.front() < 1) {
        throw std::invalid_argument("GateBlock: targets are 1-based");
    }
    const Eigen::Index dim = Eigen::Index{1} << targets.size();
    if (matrix.rows() != dim || matrix.cols() != dim) {
        std::ostringstream msg;
        msg << "GateBlock: matrix is " << matrix.rows() << "x" << matrix.cols()
            << " but " << targets.size() << " targets need " << dim << "x" << dim;
        throw std::invalid_argument(msg.str());
    }
    if (unitary) {
        if (dim <= 64) {
            const double dev =
                (ComplexMatrix(matrix.adjoint()) * matrix - ComplexMatrix::Identity(dim, dim))
                    .norm();
            if (dev > 1e-10 * static_cast<double>(dim)) {
                std::ostringstream msg;
                msg << "GateBlock: matrix flagged unitary but ||U^dag U - I||_F = " << dev;
                throw std::invalid_argument(msg.str());
            }
        } else {
            // Full U^dag U is cubic in dim; probe vectors give an O(dim^2) check.
            SeededRng rng(0x666c6f71u);
            for (int probe = 0; probe < 4; ++probe) {
                Eigen::VectorXcd v(dim);
                for (Eigen::Index j = 0; j < dim; ++j) {
                    auto [x, y] = rng.next_normal_pair();
                    v(j) = std::complex<double>(x, y);
                }
                v.normalize();
                const double dev = (matrix.adjoint() * (matrix * v) - v).norm();
                if (dev > 1e-10 * static_cast<double>(dim)) {
                    throw std::invalid_argument(
                        "GateBlock: matrix flagged unitary fails probe check");
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// ShardedState

template <typename RealT>
ShardedState<RealT>::ShardedState(ShardLayout layout, std::shared_ptr<WorkerPool> pool)
    : layout_(std::move(layout)),
      pool_(pool_for(layout_, std::move(pool))),
      shards_(static_cast<std::size_t>(layout_.shard_count())),
      swap_buffers_(static_cast<std::size_t>(layout_.shard_count())) {
    const std::uint64_t len = layout_.local_len();
    pool_->run([&](int w) { shards_[static_cast<std::size_t>(w)].resize(len); });
}

template <typename RealT>
ShardedState<RealT>::ShardedState(const ShardedState& other)
    : layout_(other.layout_),
      pool_(other.pool_),
      shards_(other.shards_),
      swap_buffers_(static_cast<std::size_t>(other.layout_.shard_count())) {}

template <typename RealT>
ShardedState<RealT>& ShardedState<RealT>::operator=(const ShardedState& other) {
    if (this != &other) {
        layout_ = other.layout_;
        pool_ = other.pool_;
        shards_ = other.shards_;
        swap_buffers_.assign(static_cast<std::size_t>(other.layout_.shard_count()), {});
    }
    return *this;
}

template <typename RealT>
void ShardedState<RealT>::fill_zero() {
    pool_->run([&](int w) {
        auto& amps = shards_[static_cast<std::size_t>(w)];
        std::fill(amps.begin(), amps.end(), Complex{});
    });
}

template <typename RealT>
std::vector<std::complex<RealT>>& ShardedState<RealT>::swap_buffer(int s) {
    const std::uint64_t chunk = std::min(layout_.local_len() / 2, kSwapChunk);
    auto& buf = swap_buffers_[static_cast<std::size_t>(s)];
    if (buf.size() != 2 * chunk) {
        buf.resize(2 * chunk);  // send chunk + receive chunk
    }
    return buf;
}

// ---------------------------------------------------------------------------
// State construction

template <typename RealT>
ShardedState<RealT> make_basis_state(const ShardLayout& layout, std::string_view bits,
                                     std::shared_ptr<WorkerPool> pool) {
    const int L = layout.num_qubits();
    if (static_cast<int>(bits.size()) != L) {
        std::ostringstream msg;
        msg << "make_basis_state: bitstring length " << bits.size() << " != L = " << L;
        throw std::invalid_argument(msg.str());
    }
    std::uint64_t physical = 0;
    for (int q = 1; q <= L; ++q) {
        const char c = bits[static_cast<std::size_t>(q - 1)];
        if (c != '0' && c != '1') {
            throw std::invalid_argument("make_basis_state: bitstring must be 0/1");
        }
        if (c == '1') {
            physical |= std::uint64_t{1} << (L - layout.physical_of(q));
        }
    }
    ShardedState<RealT> state(layout, std::move(pool));
    const int owner = static_cast<int>(physical >> layout.num_local());
    const std::uint64_t offset = physical & (layout.local_len() - 1);
    state.pool().run([&](int w) {
        if (w == owner) {
            state.shard(w)[offset] = std::complex<RealT>(RealT{1}, RealT{0});
        }
    });
    return state;
}

template <typename RealT>
ShardedState<RealT> make_product_state(const ShardLayout& layout,
                                       const std::vector<Eigen::Vector4cd>& pair_factors,
                                       std::shared_ptr<WorkerPool> pool) {
    const int L = layout.num_qubits();
    if (L % 2 != 0) {
        throw std::invalid_argument("make_product_state: L must be even");
    }
    if (static_cast<int>(pair_factors.size()) != L / 2) {
        std::ostringstream msg;
        msg << "make_product_state: need " << L / 2 << " pair factors, got "
            << pair_factors.size();
        throw std::invalid_argument(msg.str());
    }
    for (std::size_t k = 0; k < pair_factors.size(); ++k) {
        const double norm = pair_factors[k].norm();
        if (std::abs(norm - 1.0) > 1e-6) {
            std::ostringstream msg;
            msg << "make_product_state: factor " << k << " has norm " << norm;
            throw std::invalid_argument(msg.str());
        }
    }

    ShardedState<RealT> state(layout, std::move(pool));
    const int num_local = layout.num_local();
    const int pairs = L / 2;
    // Shift that extracts the two logical bits of pair k from a physical index.
    std::vector<std::array<int, 2>> shifts(static_cast<std::size_t>(pairs));
    for (int k = 0; k < pairs; ++k) {
        shifts[static_cast<std::size_t>(k)] = {L - layout.physical_of(2 * k + 1),
                                               L - layout.physical_of(2 * k + 2)};
    }
    state.pool().run([&](int w) {
        auto& amps = state.shard(w);
        const std::uint64_t shard_base = static_cast<std::uint64_t>(w) << num_local;
        for (std::uint64_t i = 0; i < amps.size(); ++i) {
            const std::uint64_t physical = shard_base | i;
            std::complex<double> amp(1.0, 0.0);
            for (int k = 0; k < pairs; ++k) {
                const auto& s = shifts[static_cast<std::size_t>(k)];
                const std::uint64_t v =
                    (((physical >> s[0]) & 1) << 1) | ((physical >> s[1]) & 1);
                amp *= pair_factors[static_cast<std::size_t>(k)](static_cast<Eigen::Index>(v));
            }
            amps[i] = std::complex<RealT>(static_cast<RealT>(amp.real()),
                                          static_cast<RealT>(amp.imag()));
        }
    });
    return state;
}

// ---------------------------------------------------------------------------
// Gate application

namespace {

template <typename RealT, int Q>
void apply_block_fixed(ShardedState<RealT>& state, const std::vector<int>& bits,
                       const ComplexMatrix& u) {
    constexpr int dim = 1 << Q;
    std::array<RealT, dim * dim> mre{};
    std::array<RealT, dim * dim> mim{};
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            mre[static_cast<std::size_t>(r * dim + c)] = static_cast<RealT>(u(r, c).real());
            mim[static_cast<std::size_t>(r * dim + c)] = static_cast<RealT>(u(r, c).imag());
        }
    }
    std::array<std::uint64_t, dim> offs{};
    for (int a = 0; a < dim; ++a) {
        std::uint64_t o = 0;
        for (int i = 0; i < Q; ++i) {
            if ((a >> (Q - 1 - i)) & 1) {
                o |= std::uint64_t{1} << bits[static_cast<std::size_t>(i)];
            }
        }
        offs[static_cast<std::size_t>(a)] = o;
    }
    std::vector<int> sorted_bits = bits;
    std::sort(sorted_bits.begin(), sorted_bits.end());
    const std::uint64_t groups = state.layout().local_len() >> Q;

    state.pool().run([&](int w) {
        auto* amps = state.shard(w).data();
        for (std::uint64_t g = 0; g < groups; ++g) {
            const std::uint64_t base = insert_zero_bits(g, sorted_bits);
            RealT vr[dim];
            RealT vi[dim];
            for (int a = 0; a < dim; ++a) {
                const auto z = amps[base | offs[static_cast<std::size_t>(a)]];
                vr[a] = z.real();
                vi[a] = z.imag();
            }
            for (int r = 0; r < dim; ++r) {
                RealT sr{};
                RealT si{};
                for (int c = 0; c < dim; ++c) {
                    const RealT ar = mre[static_cast<std::size_t>(r * dim + c)];
                    const RealT ai = mim[static_cast<std::size_t>(r * dim + c)];
                    sr += ar * vr[c] - ai * vi[c];
                    si += ar * vi[c] + ai * vr[c];
                }
                amps[base | offs[static_cast<std::size_t>(r)]] = std::complex<RealT>(sr, si);
            }
        }
    });
}

template <typename RealT>
void apply_block_dynamic(ShardedState<RealT>& state, const std::vector<int>& bits,
                         const ComplexMatrix& u) {
    const int q = static_cast<int>(bits.size());
    const std::uint64_t dim = std::uint64_t{1} << q;
    std::vector<RealT> mre(dim * dim);
    std::vector<RealT> mim(dim * dim);
    for (std::uint64_t r = 0; r < dim; ++r) {
        for (std::uint64_t c = 0; c < dim; ++c) {
            mre[r * dim + c] = static_cast<RealT>(u(static_cast<Eigen::Index>(r),
                                                    static_cast<Eigen::Index>(c)).real());
            mim[r * dim + c] = static_cast<RealT>(u(static_cast<Eigen::Index>(r),
                                                    static_cast<Eigen::Index>(c)).imag());
        }
    }
    std::vector<std::uint64_t> offs(dim);
    for (std::uint64_t a = 0; a < dim; ++a) {
        std::uint64_t o = 0;
        for (int i = 0; i < q; ++i) {
            if ((a >> (q - 1 - i)) & 1) {
                o |= std::uint64_t{1} << bits[static_cast<std::size_t>(i)];
            }
        }
        offs[a] = o;
    }
    std::vector<int> sorted_bits = bits;
    std::sort(sorted_bits.begin(), sorted_bits.end());
    const std::uint64_t groups = state.layout().local_len() >> q;

    state.pool().run([&](int w) {
        auto* amps = state.shard(w).data();
        std::vector<RealT> vr(dim);
        std::vector<RealT> vi(dim);
        std::vector<RealT> wr(dim);
        std::vector<RealT> wi(dim);
        for (std::uint64_t g = 0; g < groups; ++g) {
            const std::uint64_t base = insert_zero_bits(g, sorted_bits);
            for (std::uint64_t a = 0; a < dim; ++a) {
                const auto z = amps[base | offs[a]];
                vr[a] = z.real();
                vi[a] = z.imag();
            }
            for (std::uint64_t r = 0; r < dim; ++r) {
                RealT sr{};
                RealT si{};
                const RealT* row_re = &mre[r * dim];
                const RealT* row_im = &mim[r * dim];
                for (std::uint64_t c = 0; c < dim; ++c) {
                    sr += row_re[c] * vr[c] - row_im[c] * vi[c];
                    si += row_re[c] * vi[c] + row_im[c] * vr[c];
                }
                wr[r] = sr;
                wi[r] = si;
            }
            for (std::uint64_t r = 0; r < dim; ++r) {
                amps[base | offs[r]] = std::complex<RealT>(wr[r], wi[r]);
            }
        }
    });
}

template <typename RealT>
void apply_block_local(ShardedState<RealT>& state, const std::vector<int>& physical,
                       const ComplexMatrix& u) {
    const int L = state.layout().num_qubits();
    std::vector<int> bits(physical.size());
    for (std::size_t i = 0; i < physical.size(); ++i) {
        bits[i] = L - physical[i];
    }
    switch (physical.size()) {
        case 1:
            apply_block_fixed<RealT, 1>(state, bits, u);
            break;
        case 2:
            apply_block_fixed<RealT, 2>(state, bits, u);
            break;
        case 3:
            apply_block_fixed<RealT, 3>(state, bits, u);
            break;
        case 4:
            apply_block_fixed<RealT, 4>(state, bits, u);
            break;
        default:
            apply_block_dynamic<RealT>(state, bits, u);
            break;
    }
}

}  // namespace

template <typename RealT>
void apply_gate(ShardedState<RealT>& state, const GateBlock& gate, RestorePolicy policy) {
    const int L = state.layout().num_qubits();
    for (const int t : gate.targets) {
        if (t < 1 || t > L) {
            std::ostringstream msg;
            msg << "apply_gate: target " << t << " out of range for L = " << L;
            throw std::invalid_argument(msg.str());
        }
    }

    std::vector<int> physical(gate.targets.size());
    for (std::size_t i = 0; i < gate.targets.size(); ++i) {
        physical[i] = state.layout().physical_of(gate.targets[i]);
    }

    std::vector<std::pair<int, int>> swaps;
    std::vector<int> globals;
    for (const int p : physical) {
        if (state.layout().is_global_position(p)) {
            globals.push_back(p);
        }
    }
    if (!globals.empty()) {
        std::sort(globals.begin(), globals.end());
        // Free local hosts, most significant strides last: take the largest
        // positions (smallest strides) first.
        std::vector<int> hosts;
        for (int p = L; p > state.layout().num_global(); --p) {
            if (static_cast<int>(hosts.size()) == static_cast<int>(globals.size())) {
                break;
            }
            if (std::find(physical.begin(), physical.end(), p) == physical.end()) {
                hosts.push_back(p);
            }
        }
        if (hosts.size() < globals.size()) {
            throw std::invalid_argument(
                "apply_gate: not enough local positions to host the gate");
        }
        for (std::size_t i = 0; i < globals.size(); ++i) {
            swaps.emplace_back(globals[i], hosts[i]);
        }
        swap_global_local(state, swaps);
        for (std::size_t i = 0; i < gate.targets.size(); ++i) {
            physical[i] = state.layout().physical_of(gate.targets[i]);
        }
    }

    apply_block_local(state, physical, gate.matrix);

    if (policy == RestorePolicy::Immediate && !swaps.empty()) {
        swap_global_local(state, swaps);  // swapping the same pairs is the inverse
    }
}

template <typename RealT>
void apply_gates(ShardedState<RealT>& state, const std::vector<GateBlock>& gates,
                 RestorePolicy policy) {
    for (const auto& g : gates) {
        apply_gate(state, g, policy);
    }
}

// ---------------------------------------------------------------------------
// Collectives over shards

template <typename RealT>
void swap_global_local(ShardedState<RealT>& state,
                       const std::vector<std::pair<int, int>>& pairs) {
    auto& lay = state.layout();
    const int L = lay.num_qubits();
    const int Ng = lay.num_global();

    std::vector<int> seen;
    std::vector<std::pair<int, int>> normalized;  // (global, local)
    for (const auto& [a, b] : pairs) {
        if (a < 1 || a > L || b < 1 || b > L) {
            throw std::invalid_argument("swap_global_local: position out of range");
        }
        const bool ga = lay.is_global_position(a);
        const bool gb = lay.is_global_position(b);
        if (ga == gb) {
            throw std::invalid_argument(
                "swap_global_local: each pair needs one global and one local position");
        }
        normalized.emplace_back(ga ? a : b, ga ? b : a);
        seen.push_back(a);
        seen.push_back(b);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        throw std::invalid_argument("swap_global_local: pairs must be disjoint");
    }

    for (const auto& [g, l] : normalized) {
        const int gbit = Ng - g;
        const int lbit = L - l;
        const std::uint64_t half = lay.local_len() / 2;
        const std::uint64_t chunk = std::min(half, kSwapChunk);
        state.pool().run([&](int w) {
            const int partner = w ^ (1 << gbit);
            const std::uint64_t my_bit = (static_cast<std::uint64_t>(w) >> gbit) & 1;
            const std::uint64_t moving = my_bit ^ 1;  // local indices whose lbit differs
            auto* amps = state.shard(w).data();
            auto& buf = state.swap_buffer(w);
            auto* send = buf.data();
            auto* recv = buf.data() + chunk;
            // Streamed in bounded chunks; every worker runs the identical
            // chunk loop, keeping the collective phases aligned.
            for (std::uint64_t off = 0; off < half; off += chunk) {
                const std::uint64_t n = std::min(chunk, half - off);
                for (std::uint64_t c = 0; c < n; ++c) {
                    send[c] = amps[insert_bit(off + c, lbit, moving)];
                }
                state.pool().exchange(w, partner, send, recv,
                                      n * sizeof(std::complex<RealT>));
                for (std::uint64_t c = 0; c < n; ++c) {
                    amps[insert_bit(off + c, lbit, moving)] = recv[c];
                }
            }
        });
        lay.swap_physical(g, l);
    }
}

namespace {

// In-shard exchange of two local physical positions; no communication.
template <typename RealT>
void swap_local_bits(ShardedState<RealT>& state, int pos_a, int pos_b) {
    auto& lay = state.layout();
    const int L = lay.num_qubits();
    std::vector<int> bits = {L - pos_a, L - pos_b};
    std::sort(bits.begin(), bits.end());
    const std::uint64_t quarter = lay.local_len() / 4;
    const std::uint64_t lo = std::uint64_t{1} << bits[0];
    const std::uint64_t hi = std::uint64_t{1} << bits[1];
    state.pool().run([&](int w) {
        auto* amps = state.shard(w).data();
        for (std::uint64_t c = 0; c < quarter; ++c) {
            const std::uint64_t base = insert_zero_bits(c, bits);
            std::swap(amps[base | lo], amps[base | hi]);
        }
    });
    lay.swap_physical(pos_a, pos_b);
}

template <typename RealT>
void swap_positions(ShardedState<RealT>& state, int pos_a, int pos_b) {
    if (pos_a == pos_b) {
        return;
    }
    const auto& lay = state.layout();
    const bool ga = lay.is_global_position(pos_a);
    const bool gb = lay.is_global_position(pos_b);
    if (!ga && !gb) {
        swap_local_bits(state, pos_a, pos_b);
    } else if (ga != gb) {
        swap_global_local(state, {{pos_a, pos_b}});
    } else {
        // Both global: route through the least significant local position.
        const int t = lay.num_qubits();
        swap_global_local(state, {{pos_a, t}});
        swap_global_local(state, {{pos_b, t}});
        swap_global_local(state, {{pos_a, t}});
    }
}

}  // namespace

template <typename RealT>
void canonicalize(ShardedState<RealT>& state) {
    const int L = state.layout().num_qubits();
    for (int p = 1; p <= L; ++p) {
        if (state.layout().logical_at(p) == p) {
            continue;
        }
        swap_positions(state, p, state.layout().physical_of(p));
    }
}

// ---------------------------------------------------------------------------
// Reductions

template <typename RealT>
std::complex<double> inner_product(const ShardedState<RealT>& psi,
                                   const ShardedState<RealT>& phi) {
    if (psi.layout() != phi.layout()) {
        throw LayoutMismatchError(
            "inner_product: states must share layout and logical qubit ordering");
    }
    std::complex<double> result{};
    psi.pool().run([&](int w) {
        const auto& a = psi.shard(w);
        const auto& b = phi.shard(w);
        double re = 0.0;
        double im = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double ar = static_cast<double>(a[i].real());
            const double ai = static_cast<double>(a[i].imag());
            const double br = static_cast<double>(b[i].real());
            const double bi = static_cast<double>(b[i].imag());
            re += ar * br + ai * bi;
            im += ar * bi - ai * br;
        }
        const auto total = psi.pool().all_reduce_sum(w, {re, im});
        if (w == 0) {
            result = total;
        }
    });
    return result;
}

template <typename RealT>
double norm_squared(const ShardedState<RealT>& psi) {
    return inner_product(psi, psi).real();
}

template <typename RealT>
void axpy(ShardedState<RealT>& out, std::complex<double> alpha,
          const ShardedState<RealT>& in) {
    if (out.layout() != in.layout()) {
        throw LayoutMismatchError("axpy: states must share layout and qubit ordering");
    }
    const RealT ar = static_cast<RealT>(alpha.real());
    const RealT ai = static_cast<RealT>(alpha.imag());
    out.pool().run([&](int w) {
        auto& o = out.shard(w);
        const auto& x = in.shard(w);
        for (std::size_t i = 0; i < o.size(); ++i) {
            const RealT xr = x[i].real();
            const RealT xi = x[i].imag();
            o[i] = std::complex<RealT>(o[i].real() + ar * xr - ai * xi,
                                       o[i].imag() + ar * xi + ai * xr);
        }
    });
}

// ---------------------------------------------------------------------------
// Gate fusion

namespace {

std::uint64_t place_bits(std::uint64_t sub, const std::vector<int>& shifts) {
    std::uint64_t out = 0;
    const int q = static_cast<int>(shifts.size());
    for (int i = 0; i < q; ++i) {
        out |= ((sub >> (q - 1 - i)) & 1) << shifts[static_cast<std::size_t>(i)];
    }
    return out;
}

// Embeds a gate into the window [lo, hi] (window index is MSB-first over the
// window's qubits).
ComplexMatrix lift_into_window(const GateBlock& g, int lo, int hi) {
    const int w = hi - lo + 1;
    const int q = g.arity();
    if (w == q) {
        bool ascending_span = true;
        for (int i = 0; i < q; ++i) {
            if (g.targets[static_cast<std::size_t>(i)] != lo + i) {
                ascending_span = false;
                break;
            }
        }
        if (ascending_span) {
            return g.matrix;
        }
    }
    const std::uint64_t dim = std::uint64_t{1} << w;
    const std::uint64_t gdim = std::uint64_t{1} << q;
    std::vector<int> shifts(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) {
        shifts[static_cast<std::size_t>(i)] = (w - 1) - (g.targets[static_cast<std::size_t>(i)] - lo);
    }
    std::vector<int> sorted_shifts = shifts;
    std::sort(sorted_shifts.begin(), sorted_shifts.end());
    ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim),
                                          static_cast<Eigen::Index>(dim));
    const std::uint64_t rest_count = dim >> q;
    for (std::uint64_t rest = 0; rest < rest_count; ++rest) {
        const std::uint64_t base = insert_zero_bits(rest, sorted_shifts);
        for (std::uint64_t a = 0; a < gdim; ++a) {
            const std::uint64_t row = base | place_bits(a, shifts);
            for (std::uint64_t b = 0; b < gdim; ++b) {
                const std::uint64_t col = base | place_bits(b, shifts);
                m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                    g.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            }
        }
    }
    return m;
}

// Re-embeds a window matrix into an enclosing window.
ComplexMatrix expand_window(const ComplexMatrix& m, int old_lo, int old_hi, int new_lo,
                            int new_hi) {
    const int left = old_lo - new_lo;
    const int right = new_hi - old_hi;
    if (left == 0 && right == 0) {
        return m;
    }
    const int old_w = old_hi - old_lo + 1;
    const std::uint64_t old_dim = std::uint64_t{1} << old_w;
    const std::uint64_t new_dim = std::uint64_t{1} << (new_hi - new_lo + 1);
    ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(new_dim),
                                            static_cast<Eigen::Index>(new_dim));
    const std::uint64_t lefts = std::uint64_t{1} << left;
    const std::uint64_t rights = std::uint64_t{1} << right;
    for (std::uint64_t a = 0; a < lefts; ++a) {
        for (std::uint64_t b = 0; b < rights; ++b) {
            const std::uint64_t pad = (a << (old_w + right)) | b;
            for (std::uint64_t r = 0; r < old_dim; ++r) {
                for (std::uint64_t c = 0; c < old_dim; ++c) {
                    out(static_cast<Eigen::Index>(pad | (r << right)),
                        static_cast<Eigen::Index>(pad | (c << right))) =
                        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                }
            }
        }
    }
    return out;
}

struct FusionWindow {
    int lo;
    int hi;
    ComplexMatrix matrix;
    bool unitary;
};

}  // namespace

std::vector<GateBlock> fuse_layer(const std::vector<GateBlock>& gates, int window) {
    if (window < 2 || window > 12) {
        throw std::invalid_argument("fuse_layer: window must be in [2, 12]");
    }
    if (window == 2) {
        return gates;  // fusion disabled
    }

    std::vector<FusionWindow> wins;
    for (const auto& g : gates) {
        const auto [lo_it, hi_it] = std::minmax_element(g.targets.begin(), g.targets.end());
        const int glo = *lo_it;
        const int ghi = *hi_it;

        // A gate may be folded into window j only if it commutes past every
        // window created after j, i.e. its span is disjoint from all of them.
        int first_candidate = 0;
        for (int j = static_cast<int>(wins.size()) - 1; j >= 0; --j) {
            const auto& win = wins[static_cast<std::size_t>(j)];
            if (!(ghi < win.lo || glo > win.hi)) {
                first_candidate = j;
                break;
            }
        }

        bool merged = false;
        for (int j = first_candidate; j < static_cast<int>(wins.size()); ++j) {
            auto& win = wins[static_cast<std::size_t>(j)];
            const int nlo = std::min(win.lo, glo);
            const int nhi = std::max(win.hi, ghi);
            if (nhi - nlo + 1 > window) {
                continue;
            }
            if (nlo != win.lo || nhi != win.hi) {
                win.matrix = expand_window(win.matrix, win.lo, win.hi, nlo, nhi);
                win.lo = nlo;
                win.hi = nhi;
            }
            win.matrix = lift_into_window(g, win.lo, win.hi) * win.matrix;
            win.unitary = win.unitary && g.unitary;
            merged = true;
            break;
        }
        if (!merged) {
            wins.push_back({glo, ghi, lift_into_window(g, glo, ghi), g.unitary});
        }
    }

    std::vector<GateBlock> out;
    out.reserve(wins.size());
    for (auto& win : wins) {
        std::vector<int> targets(static_cast<std::size_t>(win.hi - win.lo + 1));
        std::iota(targets.begin(), targets.end(), win.lo);
        out.emplace_back(std::move(targets), std::move(win.matrix), win.unitary);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Amplitude dumps

template <typename RealT>
std::vector<std::complex<RealT>> dump_logical_amplitudes(const ShardedState<RealT>& state) {
    const auto& lay = state.layout();
    const int L = lay.num_qubits();
    const int num_local = lay.num_local();
    const std::uint64_t total = std::uint64_t{1} << L;
    std::vector<int> src_shift(static_cast<std::size_t>(L));
    std::vector<int> dst_shift(static_cast<std::size_t>(L));
    for (int q = 1; q <= L; ++q) {
        src_shift[static_cast<std::size_t>(q - 1)] = L - q;
        dst_shift[static_cast<std::size_t>(q - 1)] = L - lay.physical_of(q);
    }
    std::vector<std::complex<RealT>> out(total);
    const std::uint64_t local_mask = lay.local_len() - 1;
    for (std::uint64_t b = 0; b < total; ++b) {
        std::uint64_t physical = 0;
        for (int q = 0; q < L; ++q) {
            physical |= ((b >> src_shift[static_cast<std::size_t>(q)]) & 1)
                        << dst_shift[static_cast<std::size_t>(q)];
        }
        out[b] = state.shard(static_cast<int>(physical >> num_local))[physical & local_mask];
    }
    return out;
}

template <typename RealT>
void write_amplitude_dump(const ShardedState<RealT>& state,
                          const std::filesystem::path& path) {
    const auto amps = dump_logical_amplitudes(state);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_amplitude_dump: cannot open " + path.string());
    }
    const std::uint32_t header[3] = {
        static_cast<std::uint32_t>(state.layout().num_qubits()),
        static_cast<std::uint32_t>(state.layout().num_global()),
        static_cast<std::uint32_t>(ShardedState<RealT>::precision()),
    };
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(amps.data()),
              static_cast<std::streamsize>(amps.size() * sizeof(std::complex<RealT>)));
    if (!out) {
        throw std::runtime_error("write_amplitude_dump: short write to " + path.string());
    }
}

AmplitudeDump read_amplitude_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("read_amplitude_dump: cannot open " + path.string());
    }
    std::uint32_t header[3] = {};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) {
        throw std::runtime_error("read_amplitude_dump: truncated header in " + path.string());
    }
    AmplitudeDump dump;
    dump.num_qubits = static_cast<int>(header[0]);
    dump.num_global = static_cast<int>(header[1]);
    dump.precision = static_cast<Precision>(header[2]);
    const std::uint64_t total = std::uint64_t{1} << dump.num_qubits;
    dump.amplitudes.resize(total);
    if (dump.precision == Precision::Single) {
        std::vector<std::complex<float>> raw(total);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(total * sizeof(std::complex<float>)));
        for (std::uint64_t i = 0; i < total; ++i) {
            dump.amplitudes[i] = raw[i];
        }
    } else {
        in.read(reinterpret_cast<char*>(dump.amplitudes.data()),
                static_cast<std::streamsize>(total * sizeof(std::complex<double>)));
    }
    if (!in) {
        throw std::runtime_error("read_amplitude_dump: truncated data in " + path.string());
    }
    return dump;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

template class ShardedState<float>;
template class ShardedState<double>;

#define FLOQ_INSTANTIATE(RealT)                                                               \
    template ShardedState<RealT> make_basis_state<RealT>(const ShardLayout&, std::string_view, \
                                                         std::shared_ptr<WorkerPool>);        \
    template ShardedState<RealT> make_product_state<RealT>(                                   \
        const ShardLayout&, const std::vector<Eigen::Vector4cd>&, std::shared_ptr<WorkerPool>); \
    template void apply_gate<RealT>(ShardedState<RealT>&, const GateBlock&, RestorePolicy);   \
    template void apply_gates<RealT>(ShardedState<RealT>&, const std::vector<GateBlock>&,     \
                                     RestorePolicy);                                          \
    template void swap_global_local<RealT>(ShardedState<RealT>&,                              \
                                           const std::vector<std::pair<int, int>>&);          \
    template void canonicalize<RealT>(ShardedState<RealT>&);                                  \
    template std::complex<double> inner_product<RealT>(const ShardedState<RealT>&,            \
                                                       const ShardedState<RealT>&);           \
    template double norm_squared<RealT>(const ShardedState<RealT>&);                          \
    template void axpy<RealT>(ShardedState<RealT>&, std::complex<double>,                     \
                              const ShardedState<RealT>&);                                    \
    template std::vector<std::complex<RealT>> dump_logical_amplitudes<RealT>(                 \
        const ShardedState<RealT>&);                                                          \
    template void write_amplitude_dump<RealT>(const ShardedState<RealT>&,                     \
                                              const std::filesystem::path&);

FLOQ_INSTANTIATE(float)
FLOQ_INSTANTIATE(double)

#undef FLOQ_INSTANTIATE

}  // namespace floq
