#include "sp3d/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace sp3d {

namespace {

int g_threads = []() {
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min<unsigned>(hw == 0 ? 1 : hw, 8));
}();

// Lazily started pool. Workers pick pre-assigned chunks by slot, never by a
// shared counter, so the index->worker mapping is fixed.
class Pool {
 public:
  static Pool& instance() {
    // Leaked on purpose: workers are detached and must never outlive the pool.
    static Pool* p = new Pool();
    return *p;
  }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn, int want) {
    ensure_workers(want - 1);
    const int slots = want;
    const int64_t chunk = (n + slots - 1) / slots;
    {
      std::unique_lock<std::mutex> lk(m_);
      job_fn_ = &fn;
      job_n_ = n;
      job_chunk_ = chunk;
      pending_ = 0;
      for (int s = 1; s < slots; ++s) {
        if (s - 1 >= static_cast<int>(workers_.size())) break;
        int64_t b = static_cast<int64_t>(s) * chunk;
        if (b < n) {
          tasks_.push_back(s);
          ++pending_;
        }
      }
      cv_.notify_all();
    }
    // Main thread takes slot 0.
    fn(0, std::min<int64_t>(chunk, n));
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    job_fn_ = nullptr;
  }

 private:
  void ensure_workers(int n) {
    std::unique_lock<std::mutex> lk(m_);
    while (static_cast<int>(workers_.size()) < n) {
      workers_.emplace_back([this] { worker_loop(); });
      workers_.back().detach();
    }
  }

  void worker_loop() {
    for (;;) {
      int slot;
      const std::function<void(int64_t, int64_t)>* fn;
      int64_t n, chunk;
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return !tasks_.empty(); });
        slot = tasks_.back();
        tasks_.pop_back();
        fn = job_fn_;
        n = job_n_;
        chunk = job_chunk_;
      }
      const int64_t b = static_cast<int64_t>(slot) * chunk;
      const int64_t e = std::min<int64_t>(b + chunk, n);
      if (b < e) (*fn)(b, e);
      {
        std::unique_lock<std::mutex> lk(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> workers_;
  std::vector<int> tasks_;
  const std::function<void(int64_t, int64_t)>* job_fn_ = nullptr;
  int64_t job_n_ = 0, job_chunk_ = 0;
  int pending_ = 0;
};

}  // namespace

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = std::max(1, n); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int want = static_cast<int>(std::min<int64_t>(g_threads, n));
  if (want <= 1) {
    fn(0, n);
    return;
  }
  Pool::instance().run(n, fn, want);
}

}  // namespace sp3d
