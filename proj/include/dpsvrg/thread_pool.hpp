#ifndef DPSVRG_THREAD_POOL_HPP
#define DPSVRG_THREAD_POOL_HPP

#include <algorithm>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dpsvrg {

// Static-partition fork/join pool. run(count, fn) executes fn(i) for
// i in [0, count); every task writes only its own slot, so results do not
// depend on the worker count. threads <= 1 degrades to an inline loop.
class ThreadPool {
 public:
  explicit ThreadPool(int threads) {
    const int workers = threads > 1 ? threads - 1 : 0;
    for (int w = 0; w < workers; ++w)
      workers_.emplace_back([this, w] { worker_loop(w); });
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int width() const { return static_cast<int>(workers_.size()) + 1; }

  void run(int count, const std::function<void(int)>& fn) {
    if (workers_.empty() || count <= 1) {
      for (int i = 0; i < count; ++i) fn(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lock(mu_);
      fn_ = &fn;
      count_ = count;
      pending_ = static_cast<int>(workers_.size());
      ++generation_;
    }
    cv_.notify_all();
    run_slice(static_cast<int>(workers_.size()), count, fn);  // main thread takes the last slice
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void run_slice(int slice, int count, const std::function<void(int)>& fn) {
    const int width = this->width();
    const int base = count / width, extra = count % width;
    const int begin = slice * base + std::min(slice, extra);
    const int end = begin + base + (slice < extra ? 1 : 0);
    for (int i = begin; i < end; ++i) fn(i);
  }

  void worker_loop(int slice) {
    long seen = 0;
    while (true) {
      const std::function<void(int)>* fn = nullptr;
      int count = 0;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        fn = fn_;
        count = count_;
      }
      run_slice(slice, count, *fn);
      {
        std::unique_lock<std::mutex> lock(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int count_ = 0;
  int pending_ = 0;
  long generation_ = 0;
  bool stop_ = false;
};

}  // namespace dpsvrg

#endif
