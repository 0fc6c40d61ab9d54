#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>

namespace tbstream::bus {

using Instant = std::chrono::sys_time<std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Instant now() const = 0;
};

class SystemClock : public Clock {
 public:
  Instant now() const override;
};

/// Test clock that only moves when told to.
class ManualClock : public Clock {
 public:
  explicit ManualClock(Instant start = Instant{}) : now_(start.time_since_epoch().count()) {}
  Instant now() const override { return Instant{Millis{now_.load()}}; }
  void set(Instant t) { now_.store(t.time_since_epoch().count()); }
  void advance(Millis d) { now_.fetch_add(d.count()); }

 private:
  std::atomic<long long> now_;
};

/// Explicitly stepped task queue for deterministic single-threaded runs.
class Scheduler {
 public:
  void post(std::function<void()> task);
  /// Runs the oldest pending task; false when none is pending.
  bool step();
  /// Runs tasks (including ones they post) until the queue drains.
  std::size_t run_until_idle();
  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::deque<std::function<void()>> tasks_;
};

}  // namespace tbstream::bus
