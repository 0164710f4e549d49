// Throughput comparison of the serial reference drivers against the
// OpenMP-parallel ones, plus the raw kernel rates they are built from.
#include <chrono>
#include <cstdio>

#include "nmc/generate.hpp"
#include "nmc/nonlocal.hpp"
#include "nmc/policy.hpp"
#include "nmc/train.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nmc::RunConfig bench_run_config(uint64_t sweeps, int replicas, int threads) {
  nmc::RunConfig rc;
  rc.instance_id = "bench";
  rc.schedule = nmc::Schedule{2.0, 8.0, sweeps};
  rc.success_threshold = -1;  // never succeeds, no early bookkeeping
  rc.n_replicas = replicas;
  rc.seed = 7;
  rc.threads = threads;
  return rc;
}

}  // namespace

int main() {
  int hw_threads = 1;
#ifdef _OPENMP
  hw_threads = omp_get_max_threads();
#endif
  std::printf("hardware threads: %d\n\n", hw_threads);

  nmc::GeneratorSpec spec;
  spec.family = nmc::ClauseFamily::kScaleFree;
  spec.n = 250;
  spec.m = 2300;
  spec.b = 3.0;
  spec.seed = 11;
  nmc::CnfProblem problem(nmc::gen_ksat(spec));

  constexpr uint64_t kSweeps = 2000;
  constexpr int kReplicas = 16;

  // SA ensemble: serial reference vs parallel driver
  auto t0 = Clock::now();
  auto serial = nmc::run_sa_serial(problem, bench_run_config(kSweeps, kReplicas, 1));
  double t_serial = seconds_since(t0);

  t0 = Clock::now();
  auto parallel = nmc::run_sa(problem, bench_run_config(kSweeps, kReplicas, 0));
  double t_parallel = seconds_since(t0);

  bool identical = serial.size() == parallel.size();
  for (size_t i = 0; identical && i < serial.size(); ++i)
    identical = serial[i].min_energy == parallel[i].min_energy &&
                serial[i].best_assignment == parallel[i].best_assignment;

  double mcs = double(kSweeps) * kReplicas;
  std::printf("sa ensemble (N=%d, M=%d, %d replicas x %llu sweeps)\n", spec.n,
              spec.m, kReplicas, (unsigned long long)kSweeps);
  std::printf("  serial reference: %8.2f kMCS/s\n", mcs / t_serial / 1e3);
  std::printf("  openmp driver:    %8.2f kMCS/s  (speedup %.2fx, results %s)\n",
              mcs / t_parallel / 1e3, t_serial / t_parallel,
              identical ? "identical" : "DIFFER");

  // NMC ensemble
  nmc::NmcConfig nc;
  nc.beta_nmc = 5.0;
  nc.n_steps = 10;
  nc.n_cycles = 3;
  nc.n_sw = 50;
  nc.r = 4.5;
  auto factory = [&]() {
    return std::make_unique<nmc::ThresholdSelector<nmc::CnfProblem>>(nc.r);
  };
  t0 = Clock::now();
  auto nmc_serial =
      nmc::run_nmc_serial(problem, bench_run_config(kSweeps, kReplicas, 1), nc,
                          nmc::SelectorFactory<nmc::CnfProblem>(factory));
  double tn_serial = seconds_since(t0);
  t0 = Clock::now();
  auto nmc_parallel =
      nmc::run_nmc(problem, bench_run_config(kSweeps, kReplicas, 0), nc,
                   nmc::SelectorFactory<nmc::CnfProblem>(factory));
  double tn_parallel = seconds_since(t0);
  std::printf("nmc ensemble (same geometry, %d jumps)\n", nc.n_steps);
  std::printf("  serial reference: %8.2f kMCS/s\n", mcs / tn_serial / 1e3);
  std::printf("  openmp driver:    %8.2f kMCS/s  (speedup %.2fx)\n",
              mcs / tn_parallel / 1e3, tn_serial / tn_parallel);

  // policy forward throughput over a replica batch
  nmc::PolicyParams params = nmc::init_params(3);
  const nmc::FactorGraph& graph = problem.graph();
  constexpr int kBatch = 64;
  constexpr int kRounds = 20;
  std::vector<nmc::PolicyState> states(kBatch);
  nmc::PolicyInput input;
  input.state_bits.assign(spec.n, 1.0);
  input.abs_fields.assign(spec.n, 0.5);
  input.temperature = 0.2;
  input.best_energy_norm = 1.0;
  for (auto& s : states) s.reset(spec.n);

  t0 = Clock::now();
  for (int round = 0; round < kRounds; ++round)
    for (int b = 0; b < kBatch; ++b)
      nmc::policy_forward(params, states[b], input, graph, states[b]);
  double tf_serial = seconds_since(t0);
  for (auto& s : states) s.reset(spec.n);
  t0 = Clock::now();
  for (int round = 0; round < kRounds; ++round) {
#ifdef _OPENMP
#pragma omp parallel for
#endif
    for (int b = 0; b < kBatch; ++b)
      nmc::policy_forward(params, states[b], input, graph, states[b]);
  }
  double tf_parallel = seconds_since(t0);
  double fwd = double(kBatch) * kRounds;
  std::printf("policy forward (N=%d, %d factors, batch %d)\n", spec.n,
              graph.num_factors(), kBatch);
  std::printf("  serial:           %8.2f fwd/s\n", fwd / tf_serial);
  std::printf("  openmp batch:     %8.2f fwd/s  (speedup %.2fx)\n",
              fwd / tf_parallel, tf_serial / tf_parallel);
  return 0;
}
