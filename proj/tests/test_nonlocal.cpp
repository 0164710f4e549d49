#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmc/generate.hpp"
#include "nmc/nonlocal.hpp"

using namespace nmc;

namespace {

CnfProblem random_problem(int n, int m, uint64_t seed,
                          ClauseFamily family = ClauseFamily::kUniform) {
  GeneratorSpec spec;
  spec.n = n;
  spec.m = m;
  spec.k = std::min(4, n);
  spec.family = family;
  spec.b = 3.0;
  spec.seed = seed;
  return CnfProblem(gen_ksat(spec));
}

int64_t exhaustive_minimum(const CnfProblem& p) {
  CnfState st(p, Assignment(p.num_vars(), 0));
  int64_t best = st.energy();
  uint64_t total = 1ull << p.num_vars();
  for (uint64_t i = 1; i < total; ++i) {
    st.flip(__builtin_ctzll(i));
    best = std::min(best, st.energy());
  }
  return best;
}

struct EnergyTrace : TraceSink {
  std::vector<double> energies;
  void on_mcs(uint64_t, double e, const Assignment&) override {
    energies.push_back(e);
  }
};

}  // namespace

TEST_CASE("threshold_backbone: strict cutoff") {
  CHECK(threshold_backbone({0.5, 3.2, -4.0}, 3.0) ==
        BackboneMask{0, 1, 1});
  CHECK(threshold_backbone({0.0, -0.5, 2.0}, 0.0) == BackboneMask{0, 1, 1});
  // |H| == r is excluded
  CHECK(threshold_backbone({3.0, -3.0, 3.5}, 3.0) == BackboneMask{0, 0, 1});
}

TEST_CASE("nmc_jump: cost accounting and returned-state optimality") {
  CnfProblem problem = random_problem(24, 100, 5);
  NmcConfig nc;
  nc.beta_nmc = 2.0;
  nc.n_cycles = 3;
  nc.n_sw = 7;
  Rng rng = Rng::keyed(2, 0, kStreamChain);
  Assignment a = random_assignment(problem, rng);
  Chain<CnfProblem> chain(problem, a, rng, -1);
  EnergyTrace trace;
  chain.sink = &trace;

  uint64_t before = chain.mcs;
  BackboneMask mask = threshold_backbone(chain.local_fields(), 0.4);
  JumpStatsRow stats = nmc_jump(chain, mask, 2.0, nc, SweepRule::kMetropolis);
  CHECK(chain.mcs - before == uint64_t(nc.n_cycles) * nc.n_sw);

  // returned state is the minimum-energy end-of-cycle state
  double best_cycle_end = 1e300;
  for (int c = 1; c <= nc.n_cycles; ++c)
    best_cycle_end =
        std::min(best_cycle_end, trace.energies[size_t(c) * nc.n_sw - 1]);
  CHECK(double(chain.state.energy()) == best_cycle_end);

  int mask_count = 0;
  for (uint8_t m : mask) mask_count += m;
  CHECK(stats.backbone_fraction ==
        doctest::Approx(double(mask_count) / problem.num_vars()));
  CHECK(stats.distance <= stats.backbone_fraction + 1e-12);
}

TEST_CASE("nmc_jump: fallback flag never returns a worse state than input") {
  CnfProblem problem = random_problem(20, 90, 8);
  NmcConfig nc;
  nc.beta_nmc = 1.0;
  nc.n_cycles = 2;
  nc.n_sw = 3;
  nc.jump_fallback_to_input = true;
  Rng rng = Rng::keyed(3, 1, kStreamChain);
  Chain<CnfProblem> chain(problem, random_assignment(problem, rng), rng, -1);
  for (int trial = 0; trial < 40; ++trial) {
    int64_t e_in = chain.state.energy();
    BackboneMask mask = threshold_backbone(chain.local_fields(), 0.4);
    nmc_jump(chain, mask, 1.0, nc, SweepRule::kMetropolis);
    CHECK(chain.state.energy() <= e_in);
  }
}

TEST_CASE("nmc_jump: full mask randomizes everything in one cycle") {
  CnfProblem problem = random_problem(50, 200, 13);
  NmcConfig nc;
  nc.beta_nmc = 2.0;
  nc.n_cycles = 1;
  nc.n_sw = 2;
  Rng rng = Rng::keyed(4, 0, kStreamChain);
  Chain<CnfProblem> chain(problem, random_assignment(problem, rng), rng, -1);
  BackboneMask full(50, 1);
  double mean_distance = 0.0;
  const int kTrials = 200;
  for (int t = 0; t < kTrials; ++t) {
    JumpStatsRow s = nmc_jump(chain, full, 2.0, nc, SweepRule::kMetropolis);
    CHECK(s.backbone_fraction == 1.0);
    CHECK(s.distance <= 1.0);
    mean_distance += s.distance;
  }
  mean_distance /= kTrials;
  // fresh fair values flip each variable with probability 1/2
  CHECK(mean_distance > 0.4);
  CHECK(mean_distance < 0.6);
}

TEST_CASE("nmc_jump: n_sw < 2 is a config error") {
  CnfProblem problem = random_problem(8, 20, 2);
  NmcConfig nc;
  nc.n_cycles = 1;
  nc.n_sw = 1;
  Rng rng = Rng::keyed(5, 0, kStreamChain);
  Chain<CnfProblem> chain(problem, random_assignment(problem, rng), rng, -1);
  BackboneMask mask(8, 0);
  CHECK_THROWS_AS(nmc_jump(chain, mask, 1.0, nc, SweepRule::kMetropolis),
                  ConfigError);
}

TEST_CASE("empty masks reproduce plain sweeps under identical streams") {
  CnfProblem problem = random_problem(40, 180, 17);
  const double beta = 2.0;  // flat schedule

  // With one cycle per jump the jump state is the final swept state, so the
  // whole run coincides with plain SA on the same stream.
  NmcConfig nc;
  nc.beta_nmc = beta;
  nc.n_steps = 4;
  nc.n_cycles = 1;
  nc.n_sw = 5;
  uint64_t sa_phase = 20;
  Rng rng_a = Rng::keyed(9, 0, kStreamChain);
  Chain<CnfProblem> nmc_chain(problem, random_assignment(problem, rng_a),
                              rng_a, -1);
  for (uint64_t t = 0; t < sa_phase; ++t)
    sweep(nmc_chain, beta, SweepRule::kMetropolis);
  BackboneMask empty(40, 0);
  for (int j = 0; j < nc.n_steps; ++j)
    nmc_jump(nmc_chain, empty, beta, nc, SweepRule::kMetropolis);

  // same stream, plain sweeps: each jump cycle does n_sw - 1 real sweeps
  // (the empty backbone stage costs an MCS but moves nothing)
  Rng rng_b = Rng::keyed(9, 0, kStreamChain);
  Chain<CnfProblem> sa_chain(problem, random_assignment(problem, rng_b), rng_b,
                             -1);
  uint64_t plain = sa_phase + uint64_t(nc.n_steps) * nc.n_cycles * (nc.n_sw - 1);
  for (uint64_t t = 0; t < plain; ++t)
    sweep(sa_chain, beta, SweepRule::kMetropolis);

  CHECK(nmc_chain.state.assignment() == sa_chain.state.assignment());
  CHECK(nmc_chain.state.energy() == sa_chain.state.energy());

  // With several cycles the swept trajectory is still identical MCS by MCS;
  // only the returned state rewinds to the best cycle end.
  NmcConfig nc3 = nc;
  nc3.n_cycles = 3;
  Rng rng_c = Rng::keyed(9, 0, kStreamChain);
  Chain<CnfProblem> multi(problem, random_assignment(problem, rng_c), rng_c, -1);
  for (uint64_t t = 0; t < sa_phase; ++t)
    sweep(multi, beta, SweepRule::kMetropolis);
  EnergyTrace nmc_trace;
  multi.sink = &nmc_trace;
  nmc_jump(multi, empty, beta, nc3, SweepRule::kMetropolis);

  Rng rng_d = Rng::keyed(9, 0, kStreamChain);
  Chain<CnfProblem> plain_chain(problem, random_assignment(problem, rng_d),
                                rng_d, -1);
  for (uint64_t t = 0; t < sa_phase; ++t)
    sweep(plain_chain, beta, SweepRule::kMetropolis);
  EnergyTrace sa_trace;
  plain_chain.sink = &sa_trace;
  for (int c = 0; c < nc3.n_cycles; ++c) {
    sa_trace.energies.push_back(double(plain_chain.state.energy()));  // no-op stage
    for (int s = 0; s < nc3.n_sw - 1; ++s)
      sweep(plain_chain, beta, SweepRule::kMetropolis);
  }
  CHECK(nmc_trace.energies == sa_trace.energies);
}

TEST_CASE("run_nmc: budget split, totals, and huge-r degeneracy") {
  CnfProblem problem = random_problem(30, 140, 23);
  RunConfig cfg;
  cfg.instance_id = "x";
  cfg.schedule = Schedule{2.0, 8.0, 600};
  cfg.n_replicas = 4;
  cfg.seed = 31;
  cfg.success_threshold = -1;
  NmcConfig nc;
  nc.beta_nmc = 5.0;
  nc.n_steps = 10;
  nc.n_cycles = 3;
  nc.n_sw = 10;  // jumps = 300, SA phase = 300

  CHECK(nmc_sa_phase_sweeps(cfg.schedule, nc) == 300);
  auto out = run_nmc(problem, cfg, nc, SelectorFactory<CnfProblem>([] {
                       return std::make_unique<ThresholdSelector<CnfProblem>>(
                           1e18);
                     }));
  REQUIRE(out.records.size() == 4);
  REQUIRE(out.jump_stats.size() == 4);
  for (const auto& rows : out.jump_stats) {
    REQUIRE(rows.size() == 10);
    for (const JumpStatsRow& r : rows) {
      CHECK(r.backbone_fraction == 0.0);  // r -> infinity: empty masks
      CHECK(r.distance == 0.0);
    }
  }
  for (const RunRecord& r : out.records) CHECK(r.total_mcs == 600);
}

TEST_CASE("run_nmc: config errors") {
  CnfProblem problem = random_problem(10, 30, 3);
  RunConfig cfg;
  cfg.schedule = Schedule{2.0, 8.0, 100};
  cfg.seed = 1;
  auto factory = SelectorFactory<CnfProblem>(
      [] { return std::make_unique<ThresholdSelector<CnfProblem>>(1.0); });
  NmcConfig nc;
  nc.beta_nmc = 5.0;
  nc.n_steps = 10;
  nc.n_cycles = 3;
  nc.n_sw = 10;  // 300 > 100 total
  CHECK_THROWS_AS(run_nmc(problem, cfg, nc, factory), ConfigError);
  nc.n_sw = 3;
  nc.beta_nmc = 9.0;  // outside [beta_i, beta_f]
  CHECK_THROWS_AS(run_nmc(problem, cfg, nc, factory), ConfigError);
}

TEST_CASE("run_nmc: never beats the exhaustive optimum") {
  CnfProblem problem = random_problem(20, 184, 41);
  int64_t optimum = exhaustive_minimum(problem);
  RunConfig cfg;
  cfg.schedule = Schedule{2.0, 8.0, 500};
  cfg.n_replicas = 6;
  cfg.seed = 77;
  cfg.success_threshold = -1;
  NmcConfig nc;
  nc.beta_nmc = 5.0;
  nc.n_steps = 5;
  nc.n_cycles = 3;
  nc.n_sw = 10;
  auto out = run_nmc(problem, cfg, nc, SelectorFactory<CnfProblem>([] {
                       return std::make_unique<ThresholdSelector<CnfProblem>>(
                           3.0);
                     }));
  for (const RunRecord& r : out.records) CHECK(r.min_energy >= double(optimum));
}

TEST_CASE("run_nmc: serial reference matches the parallel driver") {
  CnfProblem problem = random_problem(25, 110, 55);
  RunConfig cfg;
  cfg.schedule = Schedule{2.0, 8.0, 400};
  cfg.n_replicas = 6;
  cfg.seed = 13;
  cfg.success_threshold = 0;
  NmcConfig nc;
  nc.beta_nmc = 5.0;
  nc.n_steps = 8;
  nc.n_cycles = 3;
  nc.n_sw = 8;
  auto factory = SelectorFactory<CnfProblem>(
      [] { return std::make_unique<ThresholdSelector<CnfProblem>>(2.0); });
  auto serial = run_nmc_serial(problem, cfg, nc, factory);
  auto parallel = run_nmc(problem, cfg, nc, factory);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].min_energy == parallel.records[i].min_energy);
    CHECK(serial.records[i].best_assignment ==
          parallel.records[i].best_assignment);
    CHECK(serial.records[i].first_success_mcs ==
          parallel.records[i].first_success_mcs);
  }
}

TEST_CASE("random-mask selector hits the requested density") {
  CnfProblem problem = random_problem(200, 800, 67);
  Rng rng = Rng::keyed(6, 0, kStreamChain);
  Chain<CnfProblem> chain(problem, random_assignment(problem, rng), rng, -1);
  RandomMaskSelector<CnfProblem> sel(0.25);
  double mean = 0.0;
  for (int t = 0; t < 50; ++t) {
    BackboneMask m = sel.select(chain, 1.0, t);
    int c = 0;
    for (uint8_t b : m) c += b;
    mean += double(c) / 200.0;
  }
  mean /= 50;
  CHECK(mean == doctest::Approx(0.25).epsilon(0.15));
}
