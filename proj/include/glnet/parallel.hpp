#pragma once

// Minimal blocking thread pool with deterministic work partitioning.
//
// parallel_for splits [0, n) into contiguous chunks whose boundaries depend
// only on (n, grain, thread count), never on scheduling order, and each chunk
// touches a disjoint index range. Kernels built on it are therefore bitwise
// deterministic for a fixed thread count.

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace glnet {

class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  // Must be called before first use to take effect; subsequent calls with a
  // different count rebuild the worker set.
  static void set_threads(int n) {
    instance().reset_workers(std::max(1, n));
  }

  int threads() const { return num_threads_; }

  // body(begin, end) is invoked on contiguous disjoint ranges covering [0, n).
  void parallel_for(std::int64_t n, std::int64_t grain,
                    const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    grain = std::max<std::int64_t>(1, grain);
    const std::int64_t max_chunks = (n + grain - 1) / grain;
    const int chunks = static_cast<int>(std::min<std::int64_t>(num_threads_, max_chunks));
    if (chunks <= 1) {
      body(0, n);
      return;
    }
    const std::int64_t per = (n + chunks - 1) / chunks;
    std::vector<std::function<void()>> tasks;
    tasks.reserve(static_cast<std::size_t>(chunks));
    for (int c = 0; c < chunks; ++c) {
      const std::int64_t b = per * c;
      const std::int64_t e = std::min<std::int64_t>(n, b + per);
      if (b >= e) break;
      tasks.emplace_back([&body, b, e] { body(b, e); });
    }
    run_batch(tasks);
  }

 private:
  ThreadPool() {
    int n = 0;
    if (const char* env = std::getenv("GLNET_THREADS")) n = std::atoi(env);
    if (n <= 0) {
      const unsigned hw = std::thread::hardware_concurrency();
      n = static_cast<int>(std::min(4u, hw == 0 ? 1u : hw));
    }
    reset_workers(n);
  }

  ~ThreadPool() { stop_workers(); }

  void reset_workers(int n) {
    if (n == num_threads_ && (n == 1 || !workers_.empty())) return;
    stop_workers();
    num_threads_ = n;
    if (n <= 1) return;
    stopping_ = false;
    for (int i = 0; i < n - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void stop_workers() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
    workers_.clear();
  }

  void worker_loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (stopping_ && queue_.empty()) return;
        task = std::move(queue_.back());
        queue_.pop_back();
      }
      task();
      {
        std::unique_lock<std::mutex> lock(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  void run_batch(std::vector<std::function<void()>>& tasks) {
    if (tasks.empty()) return;
    if (workers_.empty() || tasks.size() == 1) {
      for (auto& t : tasks) t();
      return;
    }
    // The calling thread executes the first chunk itself.
    {
      std::unique_lock<std::mutex> lock(mu_);
      pending_ += static_cast<int>(tasks.size()) - 1;
      for (std::size_t i = 1; i < tasks.size(); ++i) queue_.push_back(tasks[i]);
    }
    cv_.notify_all();
    tasks[0]();
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
  }

  int num_threads_ = 1;
  bool stopping_ = false;
  int pending_ = 0;
  std::vector<std::thread> workers_;
  std::vector<std::function<void()>> queue_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
};

inline void parallel_for(std::int64_t n, std::int64_t grain,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  ThreadPool::instance().parallel_for(n, grain, body);
}

inline void set_threads(int n) { ThreadPool::set_threads(n); }

inline int thread_count() { return ThreadPool::instance().threads(); }

}  // namespace glnet
