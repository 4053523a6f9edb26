#include "dronesim/thread_pool.hpp"

namespace dronesim {

ThreadPool::ThreadPool(int threads) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    workers_.reserve(static_cast<std::size_t>(threads - 1));
    for (int i = 0; i < threads - 1; ++i) {
        workers_.emplace_back([this] { worker_loop(); });
    }
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    cv_start_.notify_all();
    for (auto& w : workers_) w.join();
}

void ThreadPool::run_chunks() {
    for (;;) {
        const std::size_t begin = cursor_.fetch_add(chunk_, std::memory_order_relaxed);
        if (begin >= total_) break;
        const std::size_t end = begin + chunk_ < total_ ? begin + chunk_ : total_;
        fn_(ctx_, begin, end);
    }
}

void ThreadPool::worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_start_.wait(lock, [&] { return stop_ || job_id_ != seen; });
            if (stop_) return;
            seen = job_id_;
        }
        run_chunks();
        if (active_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
            std::lock_guard<std::mutex> lock(mutex_);
            cv_done_.notify_all();
        }
    }
}

void ThreadPool::parallel_for_raw(std::size_t n, std::size_t chunk, RangeFn fn, void* ctx) {
    if (n == 0) return;
    if (workers_.empty() || n == 1) {
        fn(ctx, 0, n);
        return;
    }
    if (chunk == 0) {
        chunk = n / (static_cast<std::size_t>(lanes()) * 4);
        if (chunk == 0) chunk = 1;
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        fn_ = fn;
        ctx_ = ctx;
        total_ = n;
        chunk_ = chunk;
        cursor_.store(0, std::memory_order_relaxed);
        active_.store(static_cast<int>(workers_.size()), std::memory_order_relaxed);
        ++job_id_;
    }
    cv_start_.notify_all();
    run_chunks();
    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [&] { return active_.load(std::memory_order_acquire) == 0; });
}

}  // namespace dronesim
