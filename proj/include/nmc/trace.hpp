#pragma once

#include "nmc/anneal.hpp"
#include "nmc/metrics.hpp"

namespace nmc {

// Captures the minimum-energy state of every window of `window` sweeps,
// feeding trajectory_diagnostics without storing the full trajectory.
class WindowTracker : public TraceSink {
 public:
  explicit WindowTracker(uint64_t window) : window_(window) {
    if (window == 0) throw std::invalid_argument("window must be positive");
  }

  void on_mcs(uint64_t mcs, double energy, const Assignment& x) override {
    uint64_t w = mcs / window_;
    if (!open_ || w != current_window_) {
      flush();
      current_window_ = w;
      open_ = true;
      min_.mcs = mcs;
      min_.energy = energy;
      min_.state = x;
      return;
    }
    if (energy < min_.energy) {
      min_.mcs = mcs;
      min_.energy = energy;
      min_.state = x;
    }
  }

  std::vector<TracePoint> finish() {
    flush();
    return std::move(minima_);
  }

  uint64_t window() const { return window_; }

 private:
  void flush() {
    if (open_) minima_.push_back(std::move(min_));
    open_ = false;
    min_ = TracePoint{};
  }

  uint64_t window_;
  uint64_t current_window_ = 0;
  bool open_ = false;
  TracePoint min_;
  std::vector<TracePoint> minima_;
};

}  // namespace nmc
