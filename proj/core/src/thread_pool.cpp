// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/thread_pool.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <queue>
#include <thread>

namespace opir {

namespace {
thread_local bool t_in_worker = false;

int pick_thread_count() {
    if (const char* env = std::getenv("OPIR_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1 && n <= 64) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    if (hc == 0) hc = 1;
    return static_cast<int>(hc > 16 ? 16 : hc);
}
} // namespace

struct ThreadPool::Impl {
    std::vector<std::thread> workers;
    std::queue<std::function<void()>> queue;
    std::mutex mu;
    std::condition_variable cv;
    bool stop = false;

    explicit Impl(int n) {
        for (int i = 0; i < n; ++i)
            workers.emplace_back([this] {
                t_in_worker = true;
                for (;;) {
                    std::function<void()> job;
                    {
                        std::unique_lock<std::mutex> lk(mu);
                        cv.wait(lk, [this] { return stop || !queue.empty(); });
                        if (stop && queue.empty()) return;
                        job = std::move(queue.front());
                        queue.pop();
                    }
                    job();
                }
            });
    }

    void submit(std::function<void()> job) {
        {
            std::lock_guard<std::mutex> lk(mu);
            queue.push(std::move(job));
        }
        cv.notify_one();
    }

    ~Impl() {
        {
            std::lock_guard<std::mutex> lk(mu);
            stop = true;
        }
        cv.notify_all();
        for (auto& t : workers) t.join();
    }
};

ThreadPool::ThreadPool() {
    const int n = pick_thread_count();
    impl_ = (n > 1) ? new Impl(n - 1) : nullptr; // caller thread participates
}

ThreadPool::~ThreadPool() { delete impl_; }

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

int ThreadPool::thread_count() const { return impl_ ? static_cast<int>(impl_->workers.size()) + 1 : 1; }

void ThreadPool::parallel_for(int n, int grain, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    if (grain < 1) grain = 1;
    if (!impl_ || t_in_worker || n <= grain) {
        fn(0, n);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    const int chunks = (n + grain - 1) / grain;
    std::mutex done_mu;
    std::condition_variable done_cv;

    auto drain = [&] {
        for (;;) {
            int b = next.fetch_add(grain);
            if (b >= n) break;
            int e = b + grain < n ? b + grain : n;
            fn(b, e);
            if (done.fetch_add(1) + 1 == chunks) {
                std::lock_guard<std::mutex> lk(done_mu);
                done_cv.notify_all();
            }
        }
    };

    const int helpers = thread_count() - 1;
    for (int i = 0; i < helpers; ++i) impl_->submit(drain);
    drain();
    std::unique_lock<std::mutex> lk(done_mu);
    done_cv.wait(lk, [&] { return done.load() == chunks; });
}

void ThreadPool::run_tasks(const std::vector<std::function<void()>>& tasks) {
    if (tasks.empty()) return;
    if (!impl_ || t_in_worker || tasks.size() == 1) {
        for (const auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex done_mu;
    std::condition_variable done_cv;

    auto drain = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            tasks[i]();
            if (done.fetch_add(1) + 1 == tasks.size()) {
                std::lock_guard<std::mutex> lk(done_mu);
                done_cv.notify_all();
            }
        }
    };

    const std::size_t helpers =
        std::min<std::size_t>(tasks.size() - 1, static_cast<std::size_t>(thread_count() - 1));
    for (std::size_t i = 0; i < helpers; ++i) impl_->submit(drain);
    drain();
    std::unique_lock<std::mutex> lk(done_mu);
    done_cv.wait(lk, [&] { return done.load() == tasks.size(); });
}

} // namespace opir
