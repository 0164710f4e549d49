#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nmc/records.hpp"

namespace nmc {

// Fraction of replicas whose first success fell within the sweep budget.
double pos_at(const std::vector<RunRecord>& records, uint64_t budget_mcs);

// Expected cost to succeed at least once with probability 0.99; absent when
// pos == 0.
std::optional<double> tts99(double pos, double tau);

double residual_energy_mean(const std::vector<RunRecord>& records);

// Type-7 (linear interpolation) percentile of a sample.
double percentile(std::vector<double> values, double x);

// ---------------------------------------------------------------------------
// Bootstrap estimators
// ---------------------------------------------------------------------------

enum class BootstrapStatistic {
  kTtsAtBudget,        // TTS99 at budgets.front()
  kTtsMinOverBudgets,  // min over the budget grid
  kResidualEnergyMean,
};

struct BootstrapConfig {
  BootstrapStatistic statistic = BootstrapStatistic::kResidualEnergyMean;
  std::vector<uint64_t> budgets;
  double percentile = 0.5;
  int n_boot = 1000;
  uint64_t seed = 0;
  // Optional policy-inference overhead: tau(b) = b + overhead * jumps done
  // by budget b (requires the run geometry below).
  double jump_overhead_mcs = 0.0;
  uint64_t sa_phase_mcs = 0;
  uint64_t per_jump_mcs = 0;
  int n_jumps = 0;
};

struct BootstrapResult {
  double mean = 0.0;
  double stddev = 0.0;
};

// Per bootstrap round: resample instances with replacement and redraw each
// instance's POS from Beta(N_success + 0.5, N_failure + 0.5) before computing
// the statistic; reports mean and standard deviation of the percentile.
BootstrapResult bootstrap_percentile(
    const std::vector<std::vector<RunRecord>>& per_instance,
    const BootstrapConfig& cfg);

double tau_with_overhead(uint64_t budget, const BootstrapConfig& cfg);

// ---------------------------------------------------------------------------
// Maximum independent set / diversity of solutions
// ---------------------------------------------------------------------------

struct MisResult {
  int size = 0;
  bool exact = true;  // false when the node budget forced the greedy fallback
};

// Exact branch-and-bound MIS (component decomposition, max-degree branching,
// greedy lower bound, degree-based upper bound). `edges` hold vertex pairs.
MisResult mis_exact(int n, const std::vector<std::pair<int, int>>& edges,
                    int64_t node_budget = 2'000'000);

struct DiversityResult {
  std::vector<double> r_grid;
  std::vector<int> d_of_r;
  std::vector<uint8_t> exact;  // per grid point
  double integral = 0.0;
  int solution_count = 0;  // pairwise-distinct solutions
  bool all_exact = true;
};

DiversityResult diversity(const std::vector<Assignment>& solutions,
                          double r_min = 0.02, double r_max = 0.5,
                          double step = 0.02,
                          int64_t node_budget = 2'000'000);

// ---------------------------------------------------------------------------
// Trajectory diagnostics
// ---------------------------------------------------------------------------

struct TracePoint {
  uint64_t mcs = 0;
  double energy = 0.0;
  std::optional<Assignment> state;
};

// Per window of `window` sweeps: minimum energy and its state, plus the
// normalized Hamming distance from that state to the best state seen so far.
std::vector<TraceRow> trajectory_diagnostics(
    const std::vector<TracePoint>& trace, uint64_t window);

}  // namespace nmc
