#include "nmc/presets.hpp"

namespace nmc {

namespace {

SolvePreset make_solve(const std::string& name, ClauseFamily family, int n,
                       int m, double b, double beta_i, double beta_f,
                       uint64_t total, double beta_nmc, int steps, int cycles,
                       int n_sw, double r, int64_t threshold, int replicas) {
  SolvePreset p;
  p.name = name;
  p.gen.family = family;
  p.gen.n = n;
  p.gen.m = m;
  p.gen.k = 4;
  p.gen.b = b;
  p.schedule = Schedule{beta_i, beta_f, total};
  p.nmc.beta_nmc = beta_nmc;
  p.nmc.n_steps = steps;
  p.nmc.n_cycles = cycles;
  p.nmc.n_sw = n_sw;
  p.nmc.r = r;
  p.success_threshold = threshold;
  p.n_replicas = replicas;
  return p;
}

const std::vector<SolvePreset>& solve_presets() {
  static const std::vector<SolvePreset> presets = {
      // benchmark-scale defaults
      make_solve("sf250", ClauseFamily::kScaleFree, 250, 2300, 3.0,
                 /*beta_i=*/2.0, /*beta_f=*/8.0, /*total=*/30000,
                 /*beta_nmc=*/5.0, /*steps=*/53, /*cycles=*/3, /*n_sw=*/100,
                 /*r=*/4.5, /*threshold=*/0, /*replicas=*/4096),
      make_solve("uf500", ClauseFamily::kUniform, 500, 4942, 3.0, 3.0, 8.0,
                 50000, 5.0, 50, 3, 200, 3.0, 1, 2048),
      make_solve("uf1000", ClauseFamily::kUniform, 1000, 9884, 3.0, 3.0, 8.0,
                 100000, 5.0, 50, 3, 400, 3.0, 2, 1024),
      make_solve("uf2000", ClauseFamily::kUniform, 2000, 19768, 3.0, 3.0, 8.0,
                 200000, 5.0, 50, 3, 800, 3.0, 4, 512),
      // desk-scale presets used by the acceptance experiments
      make_solve("sf100", ClauseFamily::kScaleFree, 100, 920, 3.0, 2.0, 8.0,
                 9600, 5.0, 50, 3, 32, 1.5, 0, 64),
      make_solve("sf64", ClauseFamily::kScaleFree, 64, 589, 3.0, 2.0, 8.0,
                 6000, 5.0, 20, 3, 50, 1.5, 0, 128),
  };
  return presets;
}

PpoConfig table_ppo(const SolvePreset& solve, double lr_start, double lr_end,
                    int epochs, int nmc_steps, int minibatch, int replicas,
                    int n_sw, int steps_per_update, int n_eps,
                    int n_train_reps) {
  PpoConfig c;
  c.lr_start = lr_start;
  c.lr_end = lr_end;
  c.epochs = epochs;
  c.minibatch_sequences = minibatch;
  c.n_replicas = replicas;
  c.n_steps_per_update = steps_per_update;
  c.n_eps = n_eps;
  c.n_train_reps = n_train_reps;
  c.gamma = 0.75;
  c.lambda_gae = 0.95;
  c.c_vf = 0.25;
  c.c_ent = 1e-3;
  c.eps_clip = 0.25;
  c.max_grad_norm = 0.5;
  c.schedule = solve.schedule;
  c.nmc = solve.nmc;
  c.nmc.n_steps = nmc_steps;
  c.nmc.n_sw = n_sw;
  c.success_threshold = double(solve.success_threshold);
  return c;
}

const std::vector<TrainPreset>& train_presets() {
  static const std::vector<TrainPreset> presets = [] {
    std::vector<TrainPreset> out;
    const SolvePreset& uf500 = *find_preset("uf500");
    const SolvePreset& sf250 = *find_preset("sf250");
    const SolvePreset& sf64 = *find_preset("sf64");
    out.push_back(TrainPreset{
        "uniform", "uf500",
        table_ppo(uf500, 1e-3, 1e-4, 5, /*nmc_steps=*/51, /*minibatch=*/64,
                  /*replicas=*/2048, /*n_sw=*/200, /*steps_per_update=*/17,
                  /*n_eps=*/2, /*n_train_reps=*/5)});
    out.push_back(TrainPreset{
        "scale-free", "sf250",
        table_ppo(sf250, 1e-3, 1e-5, 5, 54, 64, 2048, 100, 18, 5, 5)});
    // second-stage refinement for the uniform class
    out.push_back(TrainPreset{
        "uniform-finetune", "uf500",
        table_ppo(uf500, 1e-4, 1e-5, 5, 50, 32, 2048, 200, 25, 2, 3)});
    // reduced desk-scale preset
    out.push_back(TrainPreset{
        "sf64", "sf64",
        table_ppo(sf64, 1e-3, 1e-5, 4, 20, 16, 128, 50, 10, 2, 4)});
    return out;
  }();
  return presets;
}

}  // namespace

const SolvePreset* find_preset(const std::string& name) {
  for (const SolvePreset& p : solve_presets())
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const SolvePreset& p : solve_presets()) names.push_back(p.name);
  return names;
}

const TrainPreset* find_train_preset(const std::string& name) {
  for (const TrainPreset& p : train_presets())
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<std::string> train_preset_names() {
  std::vector<std::string> names;
  for (const TrainPreset& p : train_presets()) names.push_back(p.name);
  return names;
}

}  // namespace nmc
