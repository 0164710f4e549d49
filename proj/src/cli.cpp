#include "nmc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "nmc/metrics.hpp"
#include "nmc/policy.hpp"
#include "nmc/records.hpp"
#include "nmc/trace.hpp"

namespace nmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

uint64_t instance_seed(uint64_t base, int index) {
  return Rng::mix64(base ^ Rng::mix64(uint64_t(index)));
}

struct NamedProblem {
  std::string id;
  CnfProblem problem;
};

std::vector<NamedProblem> load_instances(
    const std::vector<std::string>& files,
    const std::optional<GenOptions>& generate, uint64_t seed) {
  std::vector<NamedProblem> out;
  for (const std::string& path : files) {
    CnfFormula f = parse_dimacs(read_file(path));
    out.push_back({fs::path(path).filename().string(), CnfProblem(f)});
  }
  if (generate) {
    GeneratorSpec spec = generate->spec;
    for (int i = 0; i < generate->count; ++i) {
      spec.seed = instance_seed(generate->spec.seed, i);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d", generate->prefix.c_str(), i);
      out.push_back({name, CnfProblem(gen_ksat(spec))});
    }
  }
  if (out.empty()) throw ConfigError("no problem instances given");
  (void)seed;
  return out;
}

SweepRule parse_rule(const std::string& s) {
  if (s == "metropolis") return SweepRule::kMetropolis;
  if (s == "gibbs") return SweepRule::kGibbs;
  throw ConfigError("unknown sweep rule: " + s);
}

ClauseFamily parse_family(const std::string& s) {
  if (s == "uniform" || s == "uf") return ClauseFamily::kUniform;
  if (s == "scale-free" || s == "sf") return ClauseFamily::kScaleFree;
  throw ConfigError("unknown clause family: " + s);
}

}  // namespace

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const GenOptions& opt) {
  opt.spec.validate();
  fs::create_directories(opt.out_dir);
  json manifest;
  manifest["version"] = 1;
  manifest["generator"] = {
      {"family",
       opt.spec.family == ClauseFamily::kUniform ? "uniform" : "scale-free"},
      {"n", opt.spec.n},
      {"m", opt.spec.m},
      {"k", opt.spec.k},
      {"b", opt.spec.b},
      {"seed", opt.spec.seed},
      {"require_satisfiable", opt.spec.require_satisfiable},
  };
  manifest["instances"] = json::array();
  for (int i = 0; i < opt.count; ++i) {
    GeneratorSpec spec = opt.spec;
    spec.seed = instance_seed(opt.spec.seed, i);
    CnfFormula f = gen_ksat(spec);
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%03d.cnf", opt.prefix.c_str(), i);
    std::string path = (fs::path(opt.out_dir) / name).string();
    write_file(path, write_dimacs(f));
    manifest["instances"].push_back({{"file", name}, {"seed", spec.seed}});
  }
  std::string manifest_path =
      (fs::path(opt.out_dir) / (opt.prefix + "_manifest.json")).string();
  write_file(manifest_path, manifest.dump(2) + "\n");
  std::cout << "wrote " << opt.count << " instances and " << manifest_path
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

namespace {

Metadata solve_metadata(const SolveOptions& opt) {
  Metadata meta;
  meta["algo"] = opt.algo;
  meta["rule"] = opt.rule == SweepRule::kMetropolis ? "metropolis" : "gibbs";
  meta["beta_i"] = format_double(opt.schedule.beta_i);
  meta["beta_f"] = format_double(opt.schedule.beta_f);
  meta["total_sweeps"] = std::to_string(opt.schedule.total_sweeps);
  meta["success_threshold"] = std::to_string(opt.success_threshold);
  meta["replicas"] = std::to_string(opt.n_replicas);
  meta["seed"] = std::to_string(opt.seed);
  if (opt.algo != "sa") {
    meta["beta_nmc"] = format_double(opt.nmc.beta_nmc);
    meta["n_steps"] = std::to_string(opt.nmc.n_steps);
    meta["n_cycles"] = std::to_string(opt.nmc.n_cycles);
    meta["n_sw"] = std::to_string(opt.nmc.n_sw);
    meta["r"] = format_double(opt.nmc.r);
    meta["sa_phase_mcs"] =
        std::to_string(nmc_sa_phase_sweeps(opt.schedule, opt.nmc));
    meta["per_jump_mcs"] =
        std::to_string(uint64_t(opt.nmc.n_cycles) * uint64_t(opt.nmc.n_sw));
  }
  return meta;
}

}  // namespace

int cmd_solve(const SolveOptions& opt) {
  if (opt.algo != "sa" && opt.algo != "nmc" && opt.algo != "rlnmc")
    throw ConfigError("unknown algorithm: " + opt.algo);
  std::optional<PolicyParams> params;
  if (opt.algo == "rlnmc") {
    if (opt.checkpoint.empty())
      throw ConfigError("rlnmc requires --checkpoint");
    params = load_params(opt.checkpoint);
  }
  auto instances = load_instances(opt.instance_files, opt.generate, opt.seed);
  fs::create_directories(opt.out_dir);

  std::ofstream records_out(fs::path(opt.out_dir) / "records.csv");
  std::ofstream jumps_out;
  bool jumps = opt.algo != "sa" && opt.write_jump_stats;
  if (jumps) jumps_out.open(fs::path(opt.out_dir) / "jumpstats.csv");

  bool first = true;
  for (size_t i = 0; i < instances.size(); ++i) {
    const NamedProblem& inst = instances[i];
    if (inst.problem.num_vars() == 0)
      throw ConfigError("instance has no variables: " + inst.id);
    RunConfig rc;
    rc.instance_id = inst.id;
    rc.schedule = opt.schedule;
    rc.rule = opt.rule;
    rc.success_threshold = double(opt.success_threshold);
    rc.n_replicas = opt.n_replicas;
    rc.seed = instance_seed(opt.seed, int(i));
    rc.threads = opt.threads;
    if (opt.algo == "sa") {
      std::vector<RunRecord> records = run_sa(inst.problem, rc);
      if (first) write_records(records_out, records, solve_metadata(opt));
      else write_records_rows(records_out, records);
      first = false;
    } else {
      SelectorFactory<CnfProblem> factory;
      if (opt.algo == "nmc") {
        double r = opt.nmc.r;
        factory = [r] {
          return std::make_unique<ThresholdSelector<CnfProblem>>(r);
        };
      } else {
        const PolicyParams* p = &*params;
        const FactorGraph* g = &inst.problem.graph();
        factory = [p, g] { return std::make_unique<RlSelector<CnfProblem>>(*p, *g); };
      }
      NmcRunOutput out = run_nmc(inst.problem, rc, opt.nmc, factory);
      if (first) write_records(records_out, out.records, solve_metadata(opt));
      else write_records_rows(records_out, out.records);
      if (jumps) write_jump_stats(jumps_out, inst.id, out.jump_stats, i == 0);
      first = false;
    }
  }
  std::cout << "records: " << (fs::path(opt.out_dir) / "records.csv").string()
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const TrainOptions& opt) {
  opt.ppo.validate();
  auto named = load_instances(opt.instance_files, opt.generate, opt.seed);
  std::vector<const CnfProblem*> instances;
  for (const NamedProblem& p : named) instances.push_back(&p.problem);
  fs::create_directories(opt.out_dir);
  std::string ckpt_path =
      (fs::path(opt.out_dir) / opt.checkpoint_name).string();

  CheckpointCallback cb = [&](int update, const PolicyParams& params) {
    save_params(ckpt_path, params);
    (void)update;
  };
  TrainResult result = train_rlnmc(instances, opt.ppo, opt.seed, cb);
  save_params(ckpt_path, result.params);
  std::ofstream log_out(fs::path(opt.out_dir) / "trainlog.csv");
  write_train_log(log_out, result.log);
  std::cout << "checkpoint: " << ckpt_path << "\n";
  if (result.diverged) {
    std::cerr << "training diverged; checkpoint holds the last good parameters\n";
    return kExitDiverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

namespace {

struct LoadedRecords {
  std::vector<std::vector<RunRecord>> per_instance;
  std::vector<std::string> instance_ids;
  Metadata meta;
};

LoadedRecords load_record_files(const std::vector<std::string>& paths) {
  LoadedRecords out;
  std::map<std::string, size_t> index;
  for (const std::string& path : paths) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open records: " + path);
    Metadata meta;
    std::vector<RunRecord> records = read_records(f, &meta);
    for (auto& [k, v] : meta) out.meta.emplace(k, v);
    for (RunRecord& r : records) {
      auto [it, fresh] = index.try_emplace(r.instance, out.per_instance.size());
      if (fresh) {
        out.per_instance.emplace_back();
        out.instance_ids.push_back(r.instance);
      }
      out.per_instance[it->second].push_back(std::move(r));
    }
  }
  if (out.per_instance.empty())
    throw std::runtime_error("no records found in inputs");
  return out;
}

std::vector<uint64_t> default_budget_grid(const LoadedRecords& recs) {
  uint64_t max_mcs = 0;
  for (const auto& inst : recs.per_instance)
    for (const RunRecord& r : inst) max_mcs = std::max(max_mcs, r.total_mcs);
  std::vector<uint64_t> budgets;
  if (max_mcs == 0) return budgets;
  // 32-point logarithmic grid ending at the full budget
  double lo = std::log(std::max<uint64_t>(1, max_mcs / 1024));
  double hi = std::log(double(max_mcs));
  for (int i = 0; i < 32; ++i) {
    double x = lo + (hi - lo) * double(i) / 31.0;
    uint64_t b = uint64_t(std::llround(std::exp(x)));
    if (budgets.empty() || b > budgets.back()) budgets.push_back(b);
  }
  return budgets;
}

}  // namespace

int cmd_eval(const EvalOptions& opt) {
  LoadedRecords recs = load_record_files(opt.records_files);
  fs::create_directories(opt.out_dir);

  BootstrapConfig bc;
  bc.n_boot = opt.n_boot;
  bc.seed = opt.seed;
  bc.jump_overhead_mcs = opt.jump_overhead_mcs;
  if (auto it = recs.meta.find("sa_phase_mcs"); it != recs.meta.end())
    bc.sa_phase_mcs = std::stoull(it->second);
  if (auto it = recs.meta.find("per_jump_mcs"); it != recs.meta.end())
    bc.per_jump_mcs = std::stoull(it->second);
  if (auto it = recs.meta.find("n_steps"); it != recs.meta.end())
    bc.n_jumps = std::stoi(it->second);

  if (opt.metric == "tts") {
    std::vector<uint64_t> budgets =
        opt.budgets.empty() ? default_budget_grid(recs) : opt.budgets;
    // per-instance point estimates; TTS at pos = 0 stays blank
    std::ofstream points(fs::path(opt.out_dir) / "tts_point.csv");
    points << "instance,budget,pos,tts\n";
    for (size_t i = 0; i < recs.per_instance.size(); ++i) {
      for (uint64_t b : budgets) {
        double pos = pos_at(recs.per_instance[i], b);
        std::optional<double> tts = tts99(pos, tau_with_overhead(b, bc));
        points << recs.instance_ids[i] << ',' << b << ',' << format_double(pos)
               << ',';
        if (tts) points << format_double(*tts);
        points << "\n";
      }
    }
    std::ofstream out(fs::path(opt.out_dir) / "tts.csv");
    out << "metric,budget,percentile,mean,stddev\n";
    for (double x : opt.percentiles) {
      for (uint64_t b : budgets) {
        bc.statistic = BootstrapStatistic::kTtsAtBudget;
        bc.budgets = {b};
        bc.percentile = x;
        BootstrapResult res = bootstrap_percentile(recs.per_instance, bc);
        out << "tts," << b << ',' << format_double(x) << ','
            << format_double(res.mean) << ',' << format_double(res.stddev)
            << "\n";
      }
      bc.statistic = BootstrapStatistic::kTtsMinOverBudgets;
      bc.budgets = budgets;
      bc.percentile = x;
      BootstrapResult res = bootstrap_percentile(recs.per_instance, bc);
      out << "tts_min,," << format_double(x) << ',' << format_double(res.mean)
          << ',' << format_double(res.stddev) << "\n";
    }
  } else if (opt.metric == "residual") {
    std::ofstream out(fs::path(opt.out_dir) / "residual.csv");
    out << "metric,percentile,mean,stddev\n";
    for (double x : opt.percentiles) {
      bc.statistic = BootstrapStatistic::kResidualEnergyMean;
      bc.percentile = x;
      BootstrapResult res = bootstrap_percentile(recs.per_instance, bc);
      out << "residual," << format_double(x) << ',' << format_double(res.mean)
          << ',' << format_double(res.stddev) << "\n";
    }
  } else if (opt.metric == "diversity") {
    std::ofstream out(fs::path(opt.out_dir) / "diversity.csv");
    out << "instance,r,d,exact\n";
    std::ofstream summary(fs::path(opt.out_dir) / "diversity_summary.csv");
    summary << "instance,diversity,solutions,all_exact\n";
    for (size_t i = 0; i < recs.per_instance.size(); ++i) {
      std::vector<Assignment> solutions;
      for (const RunRecord& r : recs.per_instance[i])
        if (r.min_energy <= double(opt.success_threshold))
          solutions.push_back(r.best_assignment);
      DiversityResult d =
          diversity(solutions, opt.r_min, opt.r_max, opt.r_step);
      for (size_t j = 0; j < d.r_grid.size(); ++j)
        out << recs.instance_ids[i] << ',' << format_double(d.r_grid[j]) << ','
            << d.d_of_r[j] << ',' << int(d.exact[j]) << "\n";
      summary << recs.instance_ids[i] << ',' << format_double(d.integral)
              << ',' << d.solution_count << ',' << int(d.all_exact) << "\n";
    }
  } else {
    throw ConfigError("unknown metric: " + opt.metric);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

int cmd_trace(const TraceOptions& opt) {
  SolveOptions base;
  base.algo = opt.algo;
  std::optional<PolicyParams> params;
  if (opt.algo == "rlnmc") {
    if (opt.checkpoint.empty()) throw ConfigError("rlnmc requires --checkpoint");
    params = load_params(opt.checkpoint);
  } else if (opt.algo != "sa" && opt.algo != "nmc") {
    throw ConfigError("unknown algorithm: " + opt.algo);
  }
  auto instances = load_instances(opt.instance_files, std::nullopt, opt.seed);
  fs::create_directories(opt.out_dir);
  std::ofstream out(fs::path(opt.out_dir) / "trace.csv");
  bool first = true;
  for (size_t i = 0; i < instances.size(); ++i) {
    const NamedProblem& inst = instances[i];
    RunConfig rc;
    rc.instance_id = inst.id;
    rc.schedule = opt.schedule;
    rc.rule = opt.rule;
    rc.success_threshold = double(opt.success_threshold);
    rc.n_replicas = opt.n_replicas;
    rc.seed = instance_seed(opt.seed, int(i));
    for (int r = 0; r < opt.n_replicas; ++r) {
      WindowTracker tracker(opt.window);
      if (opt.algo == "sa") {
        run_sa_replica(inst.problem, rc, r, &tracker);
      } else {
        std::unique_ptr<BackboneSelector<CnfProblem>> selector;
        if (opt.algo == "nmc")
          selector = std::make_unique<ThresholdSelector<CnfProblem>>(opt.nmc.r);
        else
          selector = std::make_unique<RlSelector<CnfProblem>>(
              *params, inst.problem.graph());
        run_nmc_replica(inst.problem, rc, opt.nmc, *selector, r, nullptr,
                        &tracker);
      }
      std::vector<TraceRow> rows =
          trajectory_diagnostics(tracker.finish(), opt.window);
      write_trace_rows(out, inst.id, r, rows, first);
      first = false;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// option assembly: preset < config file < overrides
// ---------------------------------------------------------------------------

GeneratorSpec make_generator_spec(const KeyValueConfig& cfg,
                                  const GeneratorSpec& base) {
  GeneratorSpec spec = base;
  if (auto v = cfg.get("gen.family")) spec.family = parse_family(*v);
  spec.n = int(cfg.get_int("gen.n", spec.n));
  if (cfg.has("gen.alpha"))
    spec.m = GeneratorSpec::clauses_for_ratio(spec.n,
                                              cfg.get_double("gen.alpha", 0));
  spec.m = int(cfg.get_int("gen.m", spec.m));
  spec.k = int(cfg.get_int("gen.k", spec.k));
  spec.b = cfg.get_double("gen.b", spec.b);
  spec.seed = uint64_t(cfg.get_int("gen.seed", int64_t(spec.seed)));
  spec.require_satisfiable =
      cfg.get_bool("gen.require_satisfiable", spec.require_satisfiable);
  return spec;
}

namespace {

KeyValueConfig merged(const KeyValueConfig& file_cfg,
                      const KeyValueConfig& overrides) {
  KeyValueConfig m = file_cfg;
  for (const auto& [k, v] : overrides.values()) m.set(k, v);
  return m;
}

}  // namespace

SolveOptions make_solve_options(const std::string& preset_name,
                                const KeyValueConfig& file_cfg,
                                const KeyValueConfig& overrides) {
  SolveOptions opt;
  if (!preset_name.empty()) {
    const SolvePreset* preset = find_preset(preset_name);
    if (!preset) throw ConfigError("unknown preset: " + preset_name);
    opt.schedule = preset->schedule;
    opt.nmc = preset->nmc;
    opt.success_threshold = preset->success_threshold;
    opt.n_replicas = preset->n_replicas;
    GenOptions gen;
    gen.spec = preset->gen;
    opt.generate = gen;
  }
  KeyValueConfig cfg = merged(file_cfg, overrides);
  if (auto v = cfg.get("run.algo")) opt.algo = *v;
  if (auto v = cfg.get("run.rule")) opt.rule = parse_rule(*v);
  opt.schedule.beta_i = cfg.get_double("schedule.beta_i", opt.schedule.beta_i);
  opt.schedule.beta_f = cfg.get_double("schedule.beta_f", opt.schedule.beta_f);
  opt.schedule.total_sweeps = uint64_t(
      cfg.get_int("schedule.total_sweeps", int64_t(opt.schedule.total_sweeps)));
  opt.nmc.beta_nmc = cfg.get_double("nmc.beta_nmc", opt.nmc.beta_nmc);
  opt.nmc.n_steps = int(cfg.get_int("nmc.n_steps", opt.nmc.n_steps));
  opt.nmc.n_cycles = int(cfg.get_int("nmc.n_cycles", opt.nmc.n_cycles));
  opt.nmc.n_sw = int(cfg.get_int("nmc.n_sw", opt.nmc.n_sw));
  opt.nmc.r = cfg.get_double("nmc.r", opt.nmc.r);
  opt.nmc.jump_fallback_to_input =
      cfg.get_bool("nmc.jump_fallback_to_input", opt.nmc.jump_fallback_to_input);
  opt.success_threshold =
      cfg.get_int("run.threshold", opt.success_threshold);
  opt.n_replicas = int(cfg.get_int("run.replicas", opt.n_replicas));
  opt.seed = uint64_t(cfg.get_int("run.seed", int64_t(opt.seed)));
  opt.threads = int(cfg.get_int("run.threads", opt.threads));
  if (auto v = cfg.get("run.out")) opt.out_dir = *v;
  if (auto v = cfg.get("run.checkpoint")) opt.checkpoint = *v;
  if (opt.generate) {
    opt.generate->spec = make_generator_spec(cfg, opt.generate->spec);
    opt.generate->count = int(cfg.get_int("gen.count", opt.generate->count));
    opt.generate->prefix = cfg.get_string("gen.prefix", preset_name.empty()
                                                            ? "instance"
                                                            : preset_name);
  } else if (cfg.has("gen.n")) {
    GenOptions gen;
    gen.spec = make_generator_spec(cfg, gen.spec);
    gen.count = int(cfg.get_int("gen.count", 1));
    gen.prefix = cfg.get_string("gen.prefix", "instance");
    opt.generate = gen;
  }
  return opt;
}

TrainOptions make_train_options(const std::string& preset_name,
                                const KeyValueConfig& file_cfg,
                                const KeyValueConfig& overrides) {
  TrainOptions opt;
  if (!preset_name.empty()) {
    const TrainPreset* preset = find_train_preset(preset_name);
    if (!preset) throw ConfigError("unknown train preset: " + preset_name);
    opt.ppo = preset->ppo;
  }
  KeyValueConfig cfg = merged(file_cfg, overrides);
  PpoConfig& p = opt.ppo;
  p.lr_start = cfg.get_double("ppo.lr_start", p.lr_start);
  p.lr_end = cfg.get_double("ppo.lr_end", p.lr_end);
  p.epochs = int(cfg.get_int("ppo.epochs", p.epochs));
  p.minibatch_sequences =
      int(cfg.get_int("ppo.minibatch", p.minibatch_sequences));
  p.n_replicas = int(cfg.get_int("ppo.replicas", p.n_replicas));
  p.n_steps_per_update =
      int(cfg.get_int("ppo.steps_per_update", p.n_steps_per_update));
  p.n_eps = int(cfg.get_int("ppo.episodes", p.n_eps));
  p.n_train_reps = int(cfg.get_int("ppo.train_reps", p.n_train_reps));
  p.gamma = cfg.get_double("ppo.gamma", p.gamma);
  p.lambda_gae = cfg.get_double("ppo.lambda_gae", p.lambda_gae);
  p.c_vf = cfg.get_double("ppo.c_vf", p.c_vf);
  p.c_ent = cfg.get_double("ppo.c_ent", p.c_ent);
  p.eps_clip = cfg.get_double("ppo.eps_clip", p.eps_clip);
  p.max_grad_norm = cfg.get_double("ppo.max_grad_norm", p.max_grad_norm);
  p.checkpoint_every = int(cfg.get_int("ppo.checkpoint_every", p.checkpoint_every));
  p.schedule.beta_i = cfg.get_double("schedule.beta_i", p.schedule.beta_i);
  p.schedule.beta_f = cfg.get_double("schedule.beta_f", p.schedule.beta_f);
  p.schedule.total_sweeps = uint64_t(
      cfg.get_int("schedule.total_sweeps", int64_t(p.schedule.total_sweeps)));
  p.nmc.beta_nmc = cfg.get_double("nmc.beta_nmc", p.nmc.beta_nmc);
  p.nmc.n_steps = int(cfg.get_int("nmc.n_steps", p.nmc.n_steps));
  p.nmc.n_cycles = int(cfg.get_int("nmc.n_cycles", p.nmc.n_cycles));
  p.nmc.n_sw = int(cfg.get_int("nmc.n_sw", p.nmc.n_sw));
  if (auto v = cfg.get("run.rule")) p.rule = parse_rule(*v);
  p.success_threshold =
      double(cfg.get_int("run.threshold", int64_t(p.success_threshold)));
  p.threads = int(cfg.get_int("run.threads", p.threads));
  opt.seed = uint64_t(cfg.get_int("run.seed", int64_t(opt.seed)));
  if (auto v = cfg.get("run.out")) opt.out_dir = *v;
  if (cfg.has("gen.n")) {
    GenOptions gen;
    gen.spec = make_generator_spec(cfg, gen.spec);
    gen.count = int(cfg.get_int("gen.count", 1));
    gen.prefix = cfg.get_string("gen.prefix", "train");
    opt.generate = gen;
  }
  return opt;
}

}  // namespace nmc
