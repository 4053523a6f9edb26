#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <thread>
#include <vector>

namespace dronesim {

// Persistent worker pool driving index-range jobs. parallel_for performs no
// heap allocation: the job is a raw function pointer plus a borrowed context,
// and workers pull fixed-size chunks off an atomic cursor. Work items must
// only write state owned by their own index range; under that contract the
// result is independent of both scheduling and worker count.
class ThreadPool {
public:
    explicit ThreadPool(int threads = 0);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    // Total parallel lanes (workers + calling thread).
    int lanes() const { return static_cast<int>(workers_.size()) + 1; }

    using RangeFn = void (*)(void* ctx, std::size_t begin, std::size_t end);

    void parallel_for_raw(std::size_t n, std::size_t chunk, RangeFn fn, void* ctx);

    template <class F>
    void parallel_for(std::size_t n, const F& fn, std::size_t chunk = 0) {
        parallel_for_raw(
            n, chunk,
            [](void* c, std::size_t b, std::size_t e) { (*static_cast<const F*>(c))(b, e); },
            const_cast<void*>(static_cast<const void*>(&fn)));
    }

private:
    void worker_loop();
    void run_chunks();

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    std::uint64_t job_id_ = 0;
    bool stop_ = false;

    RangeFn fn_ = nullptr;
    void* ctx_ = nullptr;
    std::size_t total_ = 0;
    std::size_t chunk_ = 1;
    std::atomic<std::size_t> cursor_{0};
    std::atomic<int> active_ = 0;
};

// Serial fallback used when no pool is supplied.
template <class F>
inline void maybe_parallel_for(ThreadPool* pool, std::size_t n, const F& fn,
                               std::size_t chunk = 0) {
    if (pool != nullptr && pool->lanes() > 1 && n > 1) {
        pool->parallel_for(n, fn, chunk);
    } else {
        fn(0, n);
    }
}

}  // namespace dronesim
