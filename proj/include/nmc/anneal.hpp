#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "nmc/problem.hpp"
#include "nmc/records.hpp"
#include "nmc/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nmc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SweepRule { kMetropolis, kGibbs };

// Linear inverse-temperature schedule: beta(0) = beta_i, beta(total) = beta_f,
// constant increment. Sweep t (0-based) runs at beta_at(t).
struct Schedule {
  double beta_i = 1.0;
  double beta_f = 1.0;
  uint64_t total_sweeps = 0;

  double beta_at(uint64_t t) const {
    if (total_sweeps == 0) return beta_i;
    return beta_i + (beta_f - beta_i) * (double(t) / double(total_sweeps));
  }

  void validate() const {
    if (!(beta_i <= beta_f))
      throw ConfigError("schedule requires beta_i <= beta_f");
    if (total_sweeps == 0) throw ConfigError("schedule requires total_sweeps > 0");
  }
};

// Observer called after every Monte Carlo sweep (one MCS), including mcs 0.
struct TraceSink {
  virtual ~TraceSink() = default;
  virtual void on_mcs(uint64_t mcs, double energy, const Assignment& x) = 0;
};

// One replica: incremental problem state plus its RNG stream, cost counter,
// best-so-far record and first-success instrumentation.
template <class P>
struct Chain {
  using Energy = typename P::Energy;

  typename P::State state;
  Rng rng;
  uint64_t mcs = 0;
  Energy best_energy;
  Assignment best_assignment;
  uint64_t best_mcs = 0;
  std::optional<uint64_t> first_success;
  Energy success_threshold;
  VarDomain domain = VarDomain::kBinary;
  TraceSink* sink = nullptr;

  std::vector<double> accept_scratch;  // per-sweep acceptance cache

  Chain(const P& p, Assignment a, Rng r,
        Energy threshold = std::numeric_limits<Energy>::lowest())
      : state(p, std::move(a)),
        rng(r),
        best_energy(state.energy()),
        best_assignment(state.assignment()),
        success_threshold(threshold),
        domain(p.domain()) {
    if (best_energy <= success_threshold) first_success = 0;
  }

  int num_vars() const { return int(state.assignment().size()); }

  void note_initial() {
    if (sink) sink->on_mcs(0, double(state.energy()), state.assignment());
  }

  void after_mcs() {
    ++mcs;
    Energy e = state.energy();
    if (e < best_energy) {
      best_energy = e;
      best_assignment = state.assignment();
      best_mcs = mcs;
    }
    if (!first_success && e <= success_threshold) first_success = mcs;
    if (sink) sink->on_mcs(mcs, double(e), state.assignment());
  }

  std::vector<double> local_fields() const {
    std::vector<double> h(state.assignment().size());
    for (size_t i = 0; i < h.size(); ++i)
      h[i] = state.local_field(VarIndex(i));
    return h;
  }

  RunRecord to_record(const std::string& instance, int replica) const {
    RunRecord r;
    r.instance = instance;
    r.replica = replica;
    r.min_energy = double(best_energy);
    r.first_success_mcs = first_success;
    r.total_mcs = mcs;
    r.best_assignment = best_assignment;
    return r;
  }
};

using BackboneMask = std::vector<uint8_t>;

inline double metropolis_accept_probability(double beta, double delta_e) {
  return delta_e <= 0.0 ? 1.0 : std::exp(-beta * delta_e);
}

inline double gibbs_flip_probability(double beta, double delta_e) {
  return 1.0 / (1.0 + std::exp(beta * delta_e));
}

// One sweep: visits all variables once in fixed index order; each visit draws
// one uniform and proposes a single flip. `frozen` (optional) skips masked
// variables without consuming randomness.
template <class P>
void sweep(Chain<P>& c, double beta, SweepRule rule,
           const BackboneMask* frozen = nullptr) {
  using Energy = typename P::Energy;
  auto& st = c.state;
  int n = c.num_vars();
  constexpr bool kIntegral = std::is_integral_v<Energy>;
  // Integer deltas repeat within a sweep; cache exp(-beta * d) per sweep.
  if constexpr (kIntegral) {
    if (rule == SweepRule::kMetropolis)
      std::fill(c.accept_scratch.begin(), c.accept_scratch.end(), -1.0);
  }
  auto accept_cached = [&](int64_t d) -> double {
    size_t idx = size_t(d);
    if (idx >= c.accept_scratch.size()) c.accept_scratch.resize(idx + 1, -1.0);
    double& slot = c.accept_scratch[idx];
    if (slot < 0.0) slot = std::exp(-beta * double(d));
    return slot;
  };
  for (int i = 0; i < n; ++i) {
    if (frozen && (*frozen)[i]) continue;
    Energy d = st.delta(i);
    double u = c.rng.uniform();
    bool flip;
    if (rule == SweepRule::kMetropolis) {
      if (d <= 0) {
        flip = true;
      } else if constexpr (kIntegral) {
        flip = u < accept_cached(int64_t(d));
      } else {
        flip = u < metropolis_accept_probability(beta, double(d));
      }
    } else {
      flip = u < gibbs_flip_probability(beta, double(d));
    }
    if (flip) st.flip(i);
  }
  c.after_mcs();
}

template <class P>
void metropolis_sweep(Chain<P>& c, double beta) {
  sweep(c, beta, SweepRule::kMetropolis);
}

template <class P>
void gibbs_sweep(Chain<P>& c, double beta) {
  sweep(c, beta, SweepRule::kGibbs);
}

// ---------------------------------------------------------------------------
// Replica ensemble SA driver
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string instance_id;
  Schedule schedule;
  SweepRule rule = SweepRule::kMetropolis;
  double success_threshold = 0.0;
  int n_replicas = 1;
  uint64_t seed = 0;
  int threads = 0;  // 0 = all available, 1 = serial

  void validate() const {
    schedule.validate();
    if (n_replicas < 1) throw ConfigError("n_replicas must be positive");
  }
};

template <class P>
Assignment random_assignment(const P& problem, Rng& rng) {
  Assignment a(problem.num_vars());
  for (auto& b : a) b = uint8_t(rng.coin());
  return a;
}

template <class P>
Chain<P> make_replica_chain(const P& problem, const RunConfig& cfg, int replica) {
  Rng rng = Rng::keyed(cfg.seed, uint64_t(replica), kStreamChain);
  Assignment a = random_assignment(problem, rng);
  return Chain<P>(problem, std::move(a), rng,
                  typename P::Energy(cfg.success_threshold));
}

template <class P>
RunRecord run_sa_replica(const P& problem, const RunConfig& cfg, int replica,
                         TraceSink* sink = nullptr) {
  Chain<P> chain = make_replica_chain(problem, cfg, replica);
  chain.sink = sink;
  chain.note_initial();
  for (uint64_t t = 0; t < cfg.schedule.total_sweeps; ++t)
    sweep(chain, cfg.schedule.beta_at(t), cfg.rule);
  return chain.to_record(cfg.instance_id, replica);
}

// Serial reference implementation, kept as the ground truth the parallel
// driver is tested against.
template <class P>
std::vector<RunRecord> run_sa_serial(const P& problem, const RunConfig& cfg) {
  cfg.validate();
  std::vector<RunRecord> records(cfg.n_replicas);
  for (int r = 0; r < cfg.n_replicas; ++r)
    records[r] = run_sa_replica(problem, cfg, r);
  return records;
}

template <class P>
std::vector<RunRecord> run_sa(const P& problem, const RunConfig& cfg) {
  cfg.validate();
  if (cfg.threads == 1) return run_sa_serial(problem, cfg);
  std::vector<RunRecord> records(cfg.n_replicas);
#ifdef _OPENMP
  if (cfg.threads > 1) omp_set_num_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic)
#endif
  for (int r = 0; r < cfg.n_replicas; ++r)
    records[r] = run_sa_replica(problem, cfg, r);
  return records;
}

}  // namespace nmc
