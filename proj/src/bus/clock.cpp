#include "tbstream/bus/clock.hpp"

namespace tbstream::bus {

Instant SystemClock::now() const {
  return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
}

void Scheduler::post(std::function<void()> task) {
  std::lock_guard lock(mu_);
  tasks_.push_back(std::move(task));
}

bool Scheduler::step() {
  std::function<void()> task;
  {
    std::lock_guard lock(mu_);
    if (tasks_.empty()) return false;
    task = std::move(tasks_.front());
    tasks_.pop_front();
  }
  task();
  return true;
}

std::size_t Scheduler::run_until_idle() {
  std::size_t n = 0;
  while (step()) ++n;
  return n;
}

std::size_t Scheduler::pending() const {
  std::lock_guard lock(mu_);
  return tasks_.size();
}

}  // namespace tbstream::bus
