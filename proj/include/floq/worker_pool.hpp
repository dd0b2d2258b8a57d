#pragma once

#include <barrier>
#include <complex>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace floq {

/// SPMD execution context for shard workers. Every worker runs the identical
/// body over its own shard; the only cross-worker channels are the collectives
/// below. A single std::barrier backs all synchronization, which is sound
/// because SPMD bodies execute the same collective sequence on every worker.
///
/// The calling thread acts as worker 0, so a one-worker pool spawns no threads
/// and runs everything inline.
class WorkerPool {
  public:
    explicit WorkerPool(int num_workers);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    int size() const { return num_workers_; }

    /// Runs body(worker_id) on all workers and blocks until every worker has
    /// finished. Must not be called re-entrantly from inside a body.
    void run(const std::function<void(int)>& body);

    // --- collectives, callable only from inside a run() body ---

    void barrier(int worker) {
        (void)worker;
        gate_.arrive_and_wait();
    }

    /// Deterministic sum over per-worker contributions. Every worker evaluates
    /// the same fixed binary tree over shard indices, so all observe a
    /// bit-identical result regardless of thread timing.
    std::complex<double> all_reduce_sum(int worker, std::complex<double> value);

    /// Pairwise block exchange: posts `send`, returns once `recv` holds the
    /// partner's posted block. Both sides must call with mirrored partners and
    /// equal byte counts.
    void exchange(int worker, int partner, const void* send, void* recv, std::size_t bytes);

  private:
    void worker_loop(int id);

    int num_workers_;
    std::barrier<> gate_;
    const std::function<void(int)>* body_ = nullptr;
    bool stopping_ = false;
    std::vector<std::complex<double>> reduce_slots_;
    std::vector<const void*> exchange_slots_;
    std::vector<std::thread> threads_;
};

}  // namespace floq
