#include "floq/worker_pool.hpp"

#include <array>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <iostream>
#include <stdexcept>

namespace floq {

namespace {
constexpr int kMaxWorkers = 64;
}

WorkerPool::WorkerPool(int num_workers)
    : num_workers_(num_workers),
      gate_(num_workers),
      reduce_slots_(static_cast<std::size_t>(num_workers)),
      exchange_slots_(static_cast<std::size_t>(num_workers), nullptr) {
    if (num_workers < 1 || num_workers > kMaxWorkers) {
        throw std::invalid_argument("WorkerPool: worker count out of range");
    }
    threads_.reserve(static_cast<std::size_t>(num_workers - 1));
    for (int id = 1; id < num_workers; ++id) {
        threads_.emplace_back([this, id] { worker_loop(id); });
    }
}

WorkerPool::~WorkerPool() {
    stopping_ = true;
    if (!threads_.empty()) {
        gate_.arrive_and_wait();  // releases workers, which observe stopping_
    }
    for (auto& t : threads_) {
        t.join();
    }
}

void WorkerPool::run(const std::function<void(int)>& body) {
    if (num_workers_ == 1) {
        body(0);
        return;
    }
    body_ = &body;
    gate_.arrive_and_wait();  // start phase
    body(0);
    gate_.arrive_and_wait();  // completion phase
    body_ = nullptr;
}

void WorkerPool::worker_loop(int id) {
    while (true) {
        gate_.arrive_and_wait();
        if (stopping_) {
            return;
        }
        try {
            (*body_)(id);
        } catch (const std::exception& e) {
            // An exception here would desynchronize the SPMD barrier phases;
            // operation preconditions are validated before entering the pool,
            // so this is a programming error.
            std::cerr << "fatal: exception on shard worker " << id << ": " << e.what() << "\n";
            std::abort();
        }
        gate_.arrive_and_wait();
    }
}

std::complex<double> WorkerPool::all_reduce_sum(int worker, std::complex<double> value) {
    reduce_slots_[static_cast<std::size_t>(worker)] = value;
    barrier(worker);
    std::array<std::complex<double>, kMaxWorkers> acc;
    for (int i = 0; i < num_workers_; ++i) {
        acc[static_cast<std::size_t>(i)] = reduce_slots_[static_cast<std::size_t>(i)];
    }
    for (int stride = 1; stride < num_workers_; stride *= 2) {
        for (int i = 0; i + stride < num_workers_; i += 2 * stride) {
            acc[static_cast<std::size_t>(i)] += acc[static_cast<std::size_t>(i + stride)];
        }
    }
    barrier(worker);  // slots reusable after this point
    return acc[0];
}

void WorkerPool::exchange(int worker, int partner, const void* send, void* recv,
                          std::size_t bytes) {
    exchange_slots_[static_cast<std::size_t>(worker)] = send;
    barrier(worker);
    std::memcpy(recv, exchange_slots_[static_cast<std::size_t>(partner)], bytes);
    barrier(worker);
}

}  // namespace floq
