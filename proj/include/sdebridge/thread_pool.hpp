#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sdebridge {

// Fixed-size worker pool with a blocking parallel_for.  With n_threads <= 1
// everything runs inline on the caller's thread.
class ThreadPool {
public:
    explicit ThreadPool(int n_threads) {
        const int n = n_threads - 1;
        for (int i = 0; i < n; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    ~ThreadPool() {
        {
            std::unique_lock<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // Runs fn(0..n_items-1), blocking until all items complete.  The first
    // exception thrown by any item is rethrown here.
    void parallel_for(int n_items, const std::function<void(int)>& fn) {
        if (n_items <= 0) return;
        if (workers_.empty() || n_items == 1) {
            for (int i = 0; i < n_items; ++i) fn(i);
            return;
        }
        {
            std::unique_lock<std::mutex> lk(mu_);
            fn_ = &fn;
            n_items_ = n_items;
            next_ = 0;
            remaining_ = n_items;
            error_ = nullptr;
            ++generation_;
        }
        cv_.notify_all();
        run_items();
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [this] { return remaining_ == 0; });
        fn_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

private:
    void run_items() {
        for (;;) {
            int i;
            {
                std::unique_lock<std::mutex> lk(mu_);
                if (next_ >= n_items_) return;
                i = next_++;
            }
            try {
                (*fn_)(i);
            } catch (...) {
                std::unique_lock<std::mutex> lk(mu_);
                if (!error_) error_ = std::current_exception();
            }
            std::unique_lock<std::mutex> lk(mu_);
            if (--remaining_ == 0) done_cv_.notify_all();
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            run_items();
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(int)>* fn_ = nullptr;
    int n_items_ = 0, next_ = 0, remaining_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;
};

}  // namespace sdebridge
