// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_THREAD_POOL_HPP
#define OPIR_THREAD_POOL_HPP

#include <functional>
#include <vector>

namespace opir {

/// Shared worker pool for map-style loops with disjoint writes. Reductions
/// never go through the pool, so results are bitwise independent of the
/// worker count and of how ranges get partitioned. Calls made from inside
/// a worker run inline (no nesting).
class ThreadPool {
public:
    static ThreadPool& instance();

    /// Runs fn(begin, end) over [0, n) in chunks of `grain`. Chunks must
    /// write disjoint state.
    void parallel_for(int n, int grain, const std::function<void(int, int)>& fn);

    /// Runs each task once; tasks may run concurrently. Callers merge any
    /// results in task order themselves.
    void run_tasks(const std::vector<std::function<void()>>& tasks);

    int thread_count() const;

    ~ThreadPool();

private:
    ThreadPool();
    struct Impl;
    Impl* impl_;
};

} // namespace opir

#endif
