#pragma once

#include <functional>
#include <memory>

#include "nmc/anneal.hpp"

namespace nmc {

// Nonlocal-move configuration. One jump runs n_cycles chained cycles of
// (backbone randomization, non-backbone sweep, n_sw - 2 full sweeps), so it
// costs exactly n_cycles * n_sw MCS.
struct NmcConfig {
  double beta_nmc = 0.0;
  int n_steps = 0;   // number of jumps in the NMC phase
  int n_cycles = 1;  // cycles per jump
  int n_sw = 2;      // MCS per cycle
  double r = 0.0;    // threshold-rule cutoff (energy units)
  bool jump_fallback_to_input = false;

  uint64_t jump_mcs() const {
    return uint64_t(n_steps) * uint64_t(n_cycles) * uint64_t(n_sw);
  }

  void validate(const Schedule& s) const {
    if (n_sw < 2) throw ConfigError("nmc n_sw must be >= 2");
    if (n_cycles < 1) throw ConfigError("nmc n_cycles must be >= 1");
    if (n_steps < 0) throw ConfigError("nmc n_steps must be >= 0");
    if (r < 0) throw ConfigError("nmc threshold r must be >= 0");
    if (!(s.beta_i <= beta_nmc && beta_nmc <= s.beta_f))
      throw ConfigError("beta_nmc must lie in [beta_i, beta_f]");
    if (jump_mcs() > s.total_sweeps)
      throw ConfigError("NMC phase (" + std::to_string(jump_mcs()) +
                        " MCS) exceeds the schedule total (" +
                        std::to_string(s.total_sweeps) + ")");
  }
};

// mask_i = (|H_i| > r), strict inequality.
inline BackboneMask threshold_backbone(const std::vector<double>& fields,
                                       double r) {
  BackboneMask mask(fields.size());
  for (size_t i = 0; i < fields.size(); ++i)
    mask[i] = std::abs(fields[i]) > r ? 1 : 0;
  return mask;
}

inline double hamming_fraction(const Assignment& a, const Assignment& b) {
  int64_t d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return a.empty() ? 0.0 : double(d) / double(a.size());
}

// One NMC jump at fixed beta. The mask stays fixed for the whole jump; state
// carries over between cycles. Returns the minimum-energy end-of-cycle state
// (ties broken toward the earliest cycle); with `jump_fallback_to_input` the
// input state wins when no cycle improves on it.
template <class P>
JumpStatsRow nmc_jump(Chain<P>& chain, const BackboneMask& mask, double beta,
                      const NmcConfig& cfg, SweepRule rule, int step = 0) {
  using Energy = typename P::Energy;
  if (cfg.n_sw < 2) throw ConfigError("nmc n_sw must be >= 2");
  int n = chain.num_vars();
  if (int(mask.size()) != n)
    throw DimensionError("backbone mask length does not match problem");

  Energy e_in = chain.state.energy();
  Assignment x_in;
  if (cfg.jump_fallback_to_input) x_in = chain.state.assignment();

  JumpStatsRow stats;
  stats.step = step;
  int mask_size = 0;
  for (int i = 0; i < n; ++i) mask_size += mask[i] != 0;
  stats.backbone_fraction = n > 0 ? double(mask_size) / double(n) : 0.0;

  Energy best_e{};
  Assignment best_x;
  bool have_best = false;
  for (int cycle = 0; cycle < cfg.n_cycles; ++cycle) {
    // Backbone stage: every masked variable drawn fresh at infinite
    // temperature, simultaneously (1 MCS).
    Energy e_before = chain.state.energy();
    int flipped = 0;
    for (int i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      bool v = chain.rng.coin();
      if (v != bool(chain.state.assignment()[i])) {
        chain.state.flip(i);
        ++flipped;
      }
    }
    chain.after_mcs();
    if (cycle == 0) {
      stats.distance = n > 0 ? double(flipped) / double(n) : 0.0;
      stats.delta_e = double(chain.state.energy() - e_before);
    }
    // Non-backbone stage: one sweep with the backbone frozen (1 MCS).
    sweep(chain, beta, rule, &mask);
    // Full stage: n_sw - 2 sweeps over all variables.
    for (int s = 0; s < cfg.n_sw - 2; ++s) sweep(chain, beta, rule);

    Energy e_cycle = chain.state.energy();
    if (!have_best || e_cycle < best_e) {
      best_e = e_cycle;
      best_x = chain.state.assignment();
      have_best = true;
    }
  }
  if (cfg.jump_fallback_to_input && best_e >= e_in) {
    if (chain.state.assignment() != x_in) chain.state.set_assignment(x_in);
  } else if (chain.state.assignment() != best_x) {
    chain.state.set_assignment(best_x);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Backbone selection policies
// ---------------------------------------------------------------------------

template <class P>
struct BackboneSelector {
  virtual ~BackboneSelector() = default;
  virtual void begin_replica(Chain<P>& chain) {}
  virtual BackboneMask select(Chain<P>& chain, double beta, int step) = 0;
  virtual void on_jump_result(double energy) {}
};

template <class P>
class ThresholdSelector : public BackboneSelector<P> {
 public:
  explicit ThresholdSelector(double r) : r_(r) {}
  BackboneMask select(Chain<P>& chain, double beta, int step) override {
    return threshold_backbone(chain.local_fields(), r_);
  }

 private:
  double r_;
};

// Control baseline: independent Bernoulli(q) mask each jump.
template <class P>
class RandomMaskSelector : public BackboneSelector<P> {
 public:
  explicit RandomMaskSelector(double q) : q_(q) {}
  BackboneMask select(Chain<P>& chain, double beta, int step) override {
    BackboneMask mask(chain.num_vars());
    for (auto& m : mask) m = chain.rng.uniform() < q_ ? 1 : 0;
    return mask;
  }

 private:
  double q_;
};

template <class P>
using SelectorFactory =
    std::function<std::unique_ptr<BackboneSelector<P>>()>;

// ---------------------------------------------------------------------------
// SA + NMC driver
// ---------------------------------------------------------------------------

struct NmcRunOutput {
  std::vector<RunRecord> records;
  std::vector<std::vector<JumpStatsRow>> jump_stats;  // per replica
};

inline uint64_t nmc_sa_phase_sweeps(const Schedule& s, const NmcConfig& cfg) {
  return s.total_sweeps - cfg.jump_mcs();
}

// Phase 1 runs beta_i -> beta_nmc linearly over the SA-phase sweeps; phase 2
// holds beta fixed within each jump and advances it between jumps.
inline double nmc_phase1_beta(const Schedule& s, const NmcConfig& cfg,
                              uint64_t sa_sweeps, uint64_t t) {
  if (sa_sweeps == 0) return s.beta_i;
  return s.beta_i + (cfg.beta_nmc - s.beta_i) * (double(t) / double(sa_sweeps));
}

inline double nmc_jump_beta(const Schedule& s, const NmcConfig& cfg, int step) {
  if (cfg.n_steps == 0) return cfg.beta_nmc;
  return cfg.beta_nmc +
         (s.beta_f - cfg.beta_nmc) * (double(step) / double(cfg.n_steps));
}

template <class P>
RunRecord run_nmc_replica(const P& problem, const RunConfig& cfg,
                          const NmcConfig& nmc, BackboneSelector<P>& selector,
                          int replica, std::vector<JumpStatsRow>* stats_out,
                          TraceSink* sink = nullptr) {
  Chain<P> chain = make_replica_chain(problem, cfg, replica);
  chain.sink = sink;
  chain.note_initial();
  uint64_t sa_sweeps = nmc_sa_phase_sweeps(cfg.schedule, nmc);
  for (uint64_t t = 0; t < sa_sweeps; ++t)
    sweep(chain, nmc_phase1_beta(cfg.schedule, nmc, sa_sweeps, t), cfg.rule);
  selector.begin_replica(chain);
  for (int j = 0; j < nmc.n_steps; ++j) {
    double beta = nmc_jump_beta(cfg.schedule, nmc, j);
    BackboneMask mask = selector.select(chain, beta, j);
    JumpStatsRow row = nmc_jump(chain, mask, beta, nmc, cfg.rule, j);
    selector.on_jump_result(double(chain.state.energy()));
    if (stats_out) stats_out->push_back(row);
  }
  return chain.to_record(cfg.instance_id, replica);
}

template <class P>
NmcRunOutput run_nmc_serial(const P& problem, const RunConfig& cfg,
                            const NmcConfig& nmc,
                            const SelectorFactory<P>& make_selector) {
  cfg.validate();
  nmc.validate(cfg.schedule);
  NmcRunOutput out;
  out.records.resize(cfg.n_replicas);
  out.jump_stats.resize(cfg.n_replicas);
  for (int r = 0; r < cfg.n_replicas; ++r) {
    auto selector = make_selector();
    out.records[r] = run_nmc_replica(problem, cfg, nmc, *selector, r,
                                     &out.jump_stats[r]);
  }
  return out;
}

template <class P>
NmcRunOutput run_nmc(const P& problem, const RunConfig& cfg,
                     const NmcConfig& nmc,
                     const SelectorFactory<P>& make_selector) {
  cfg.validate();
  nmc.validate(cfg.schedule);
  if (cfg.threads == 1) return run_nmc_serial(problem, cfg, nmc, make_selector);
  NmcRunOutput out;
  out.records.resize(cfg.n_replicas);
  out.jump_stats.resize(cfg.n_replicas);
#ifdef _OPENMP
  if (cfg.threads > 1) omp_set_num_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic)
#endif
  for (int r = 0; r < cfg.n_replicas; ++r) {
    auto selector = make_selector();
    out.records[r] = run_nmc_replica(problem, cfg, nmc, *selector, r,
                                     &out.jump_stats[r]);
  }
  return out;
}

}  // namespace nmc
