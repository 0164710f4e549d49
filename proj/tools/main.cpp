#include <CLI11.hpp>
#include <iostream>

#include "nmc/cli.hpp"

namespace {

using nmc::KeyValueConfig;

// Records only the flags the user actually passed, so that the
// preset < config < flags precedence stays intact.
struct OverrideSet {
  KeyValueConfig cfg;
  CLI::App* cmd;

  void add(const std::string& flag, const std::string& key,
           const std::string& help) {
    auto holder = std::make_shared<std::string>();
    cmd->add_option_function<std::string>(
           flag,
           [this, key, holder](const std::string& v) { cfg.set(key, v); },
           help)
        ->expected(1);
  }
};

void add_problem_flags(OverrideSet& ov) {
  ov.add("--family", "gen.family", "clause family: uniform | sf");
  ov.add("--n", "gen.n", "variable count");
  ov.add("--m", "gen.m", "clause count");
  ov.add("--alpha", "gen.alpha", "clause-to-variable ratio (sets m)");
  ov.add("--k", "gen.k", "clause width");
  ov.add("--b", "gen.b", "power-law exponent (scale-free)");
  ov.add("--count", "gen.count", "number of instances to generate");
  ov.add("--gen-seed", "gen.seed", "generator base seed");
  ov.add("--prefix", "gen.prefix", "generated instance name prefix");
}

void add_schedule_flags(OverrideSet& ov) {
  ov.add("--beta-i", "schedule.beta_i", "initial inverse temperature");
  ov.add("--beta-f", "schedule.beta_f", "final inverse temperature");
  ov.add("--sweeps", "schedule.total_sweeps", "total sweeps per replica");
  ov.add("--beta-nmc", "nmc.beta_nmc", "inverse temperature where jumps start");
  ov.add("--nmc-steps", "nmc.n_steps", "number of nonlocal jumps");
  ov.add("--cycles", "nmc.n_cycles", "cycles per jump");
  ov.add("--nsw", "nmc.n_sw", "MCS per jump cycle");
  ov.add("--r", "nmc.r", "backbone threshold");
  ov.add("--jump-fallback", "nmc.jump_fallback_to_input",
         "return the input state when no cycle improves (true/false)");
}

void add_run_flags(OverrideSet& ov) {
  ov.add("--algo", "run.algo", "sa | nmc | rlnmc");
  ov.add("--rule", "run.rule", "metropolis | gibbs");
  ov.add("--threshold", "run.threshold", "success energy threshold");
  ov.add("--replicas", "run.replicas", "independent replicas per instance");
  ov.add("--seed", "run.seed", "run seed");
  ov.add("--threads", "run.threads", "worker threads (0 = all, 1 = serial)");
  ov.add("--out", "run.out", "output directory");
  ov.add("--checkpoint", "run.checkpoint", "policy checkpoint (rlnmc)");
}

std::vector<uint64_t> parse_u64_list(const std::string& s) {
  std::vector<uint64_t> out;
  size_t start = 0;
  while (start < s.size()) {
    size_t pos = s.find(',', start);
    if (pos == std::string::npos) pos = s.size();
    out.push_back(std::stoull(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  size_t start = 0;
  while (start < s.size()) {
    size_t pos = s.find(',', start);
    if (pos == std::string::npos) pos = s.size();
    out.push_back(std::stod(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Solver toolkit for higher-order binary optimization: simulated "
      "annealing, nonlocal Monte Carlo jumps, and a reinforcement-learned "
      "jump policy"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen_cmd = app.add_subcommand("gen", "generate k-SAT instances");
  std::string gen_family = "uniform";
  std::string gen_alpha;
  nmc::GenOptions gen_opt;
  gen_cmd->add_option("--family", gen_family, "uniform | sf");
  gen_cmd->add_option("--n", gen_opt.spec.n, "variable count")->required();
  gen_cmd->add_option("--m", gen_opt.spec.m, "clause count");
  gen_cmd->add_option("--alpha", gen_alpha, "clause-to-variable ratio");
  gen_cmd->add_option("--k", gen_opt.spec.k, "clause width");
  gen_cmd->add_option("--b", gen_opt.spec.b, "power-law exponent");
  gen_cmd->add_option("--count", gen_opt.count, "instances to generate");
  gen_cmd->add_option("--seed", gen_opt.spec.seed, "base seed");
  gen_cmd->add_option("--out", gen_opt.out_dir, "output directory");
  gen_cmd->add_option("--prefix", gen_opt.prefix, "file name prefix");
  gen_cmd->add_flag("--satisfiable", gen_opt.spec.require_satisfiable,
                    "reject unsatisfiable instances (n <= 24)");

  // ---- solve ----
  auto* solve_cmd = app.add_subcommand("solve", "run sa | nmc | rlnmc");
  std::vector<std::string> solve_files;
  std::string solve_preset, solve_config;
  solve_cmd->add_option("instances", solve_files, "DIMACS files");
  solve_cmd->add_option("--preset", solve_preset, "built-in preset name");
  solve_cmd->add_option("--config", solve_config, "config file");
  OverrideSet solve_ov{{}, solve_cmd};
  add_run_flags(solve_ov);
  add_schedule_flags(solve_ov);
  add_problem_flags(solve_ov);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the RLNMC policy");
  std::vector<std::string> train_files;
  std::string train_preset, train_config;
  train_cmd->add_option("instances", train_files, "DIMACS files");
  train_cmd->add_option("--preset", train_preset, "train preset name");
  train_cmd->add_option("--config", train_config, "config file");
  OverrideSet train_ov{{}, train_cmd};
  add_run_flags(train_ov);
  add_schedule_flags(train_ov);
  add_problem_flags(train_ov);
  train_ov.add("--lr-start", "ppo.lr_start", "initial learning rate");
  train_ov.add("--lr-end", "ppo.lr_end", "final learning rate");
  train_ov.add("--epochs", "ppo.epochs", "PPO epochs per update");
  train_ov.add("--minibatch", "ppo.minibatch", "sequences per minibatch");
  train_ov.add("--train-replicas", "ppo.replicas", "rollout replicas");
  train_ov.add("--steps-per-update", "ppo.steps_per_update",
               "NMC steps between updates");
  train_ov.add("--episodes", "ppo.episodes", "episodes per instance");
  train_ov.add("--train-reps", "ppo.train_reps", "passes over instances");
  train_ov.add("--gamma", "ppo.gamma", "discount factor");
  train_ov.add("--lambda", "ppo.lambda_gae", "GAE lambda");
  train_ov.add("--c-vf", "ppo.c_vf", "value-loss coefficient");
  train_ov.add("--c-ent", "ppo.c_ent", "entropy coefficient");
  train_ov.add("--eps-clip", "ppo.eps_clip", "PPO clip range");
  train_ov.add("--checkpoint-every", "ppo.checkpoint_every",
               "updates between checkpoints");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "metrics over record streams");
  nmc::EvalOptions eval_opt;
  std::string eval_budgets, eval_xs;
  eval_cmd->add_option("records", eval_opt.records_files, "records.csv files")
      ->required();
  eval_cmd->add_option("--metric", eval_opt.metric,
                       "tts | residual | diversity");
  eval_cmd->add_option("--budgets", eval_budgets, "comma-separated MCS grid");
  eval_cmd->add_option("--x", eval_xs, "percentiles, e.g. 0.5,0.8");
  eval_cmd->add_option("--n-boot", eval_opt.n_boot, "bootstrap rounds");
  eval_cmd->add_option("--seed", eval_opt.seed, "bootstrap seed");
  eval_cmd->add_option("--jump-overhead", eval_opt.jump_overhead_mcs,
                       "policy-inference overhead per jump, in MCS");
  eval_cmd->add_option("--threshold", eval_opt.success_threshold,
                       "solution energy threshold (diversity)");
  eval_cmd->add_option("--r-min", eval_opt.r_min, "diversity grid start");
  eval_cmd->add_option("--r-max", eval_opt.r_max, "diversity grid end");
  eval_cmd->add_option("--r-step", eval_opt.r_step, "diversity grid step");
  eval_cmd->add_option("--out", eval_opt.out_dir, "output directory");

  // ---- trace ----
  auto* trace_cmd = app.add_subcommand("trace", "trajectory diagnostics");
  std::vector<std::string> trace_files;
  std::string trace_preset, trace_config;
  uint64_t trace_window = 300;
  trace_cmd->add_option("instances", trace_files, "DIMACS files")->required();
  trace_cmd->add_option("--preset", trace_preset, "built-in preset name");
  trace_cmd->add_option("--config", trace_config, "config file");
  trace_cmd->add_option("--window", trace_window, "window in sweeps");
  OverrideSet trace_ov{{}, trace_cmd};
  add_run_flags(trace_ov);
  add_schedule_flags(trace_ov);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      gen_opt.spec.family = gen_family == "sf" || gen_family == "scale-free"
                                ? nmc::ClauseFamily::kScaleFree
                                : nmc::ClauseFamily::kUniform;
      if (!gen_alpha.empty())
        gen_opt.spec.m = nmc::GeneratorSpec::clauses_for_ratio(
            gen_opt.spec.n, std::stod(gen_alpha));
      return nmc::cmd_gen(gen_opt);
    }
    if (solve_cmd->parsed()) {
      nmc::KeyValueConfig file_cfg;
      if (!solve_config.empty())
        file_cfg = nmc::KeyValueConfig::parse_file(solve_config);
      nmc::SolveOptions opt =
          nmc::make_solve_options(solve_preset, file_cfg, solve_ov.cfg);
      if (!solve_files.empty()) {
        opt.instance_files = solve_files;
        opt.generate.reset();
      }
      return nmc::cmd_solve(opt);
    }
    if (train_cmd->parsed()) {
      nmc::KeyValueConfig file_cfg;
      if (!train_config.empty())
        file_cfg = nmc::KeyValueConfig::parse_file(train_config);
      nmc::TrainOptions opt =
          nmc::make_train_options(train_preset, file_cfg, train_ov.cfg);
      if (!train_files.empty()) {
        opt.instance_files = train_files;
        opt.generate.reset();
      }
      return nmc::cmd_train(opt);
    }
    if (eval_cmd->parsed()) {
      if (!eval_budgets.empty()) eval_opt.budgets = parse_u64_list(eval_budgets);
      if (!eval_xs.empty()) eval_opt.percentiles = parse_double_list(eval_xs);
      return nmc::cmd_eval(eval_opt);
    }
    if (trace_cmd->parsed()) {
      nmc::KeyValueConfig file_cfg;
      if (!trace_config.empty())
        file_cfg = nmc::KeyValueConfig::parse_file(trace_config);
      nmc::SolveOptions base =
          nmc::make_solve_options(trace_preset, file_cfg, trace_ov.cfg);
      nmc::TraceOptions opt;
      opt.instance_files = trace_files;
      opt.algo = base.algo;
      opt.rule = base.rule;
      opt.schedule = base.schedule;
      opt.nmc = base.nmc;
      opt.success_threshold = base.success_threshold;
      opt.window = trace_window;
      opt.n_replicas = base.n_replicas;
      opt.seed = base.seed;
      opt.checkpoint = base.checkpoint;
      opt.out_dir = base.out_dir;
      return nmc::cmd_trace(opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nmc::kExitError;
  }
  return nmc::kExitError;
}
