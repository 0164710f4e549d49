#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmc/config.hpp"
#include "nmc/generate.hpp"
#include "nmc/nonlocal.hpp"
#include "nmc/presets.hpp"
#include "nmc/train.hpp"

namespace nmc {

// Exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDiverged = 3;

struct GenOptions {
  GeneratorSpec spec;
  int count = 1;
  std::string out_dir = ".";
  std::string prefix = "instance";
};

int cmd_gen(const GenOptions& opt);

struct SolveOptions {
  std::vector<std::string> instance_files;
  std::optional<GenOptions> generate;  // inline generation source
  std::string algo = "sa";             // sa | nmc | rlnmc
  SweepRule rule = SweepRule::kMetropolis;
  Schedule schedule;
  NmcConfig nmc;
  int64_t success_threshold = 0;
  int n_replicas = 1;
  uint64_t seed = 0;
  int threads = 0;
  std::string out_dir = ".";
  std::string checkpoint;  // required for rlnmc
  bool write_jump_stats = true;
};

int cmd_solve(const SolveOptions& opt);

struct TrainOptions {
  std::vector<std::string> instance_files;
  std::optional<GenOptions> generate;
  PpoConfig ppo;
  uint64_t seed = 0;
  std::string out_dir = ".";
  std::string checkpoint_name = "policy.ckpt";
};

int cmd_train(const TrainOptions& opt);

struct EvalOptions {
  std::vector<std::string> records_files;
  std::string metric = "tts";  // tts | residual | diversity
  std::vector<uint64_t> budgets;
  std::vector<double> percentiles = {0.5, 0.8};
  int n_boot = 1000;
  uint64_t seed = 0;
  double jump_overhead_mcs = 0.0;
  int64_t success_threshold = 0;
  double r_min = 0.02, r_max = 0.5, r_step = 0.02;
  std::string out_dir = ".";
};

int cmd_eval(const EvalOptions& opt);

struct TraceOptions {
  std::vector<std::string> instance_files;
  std::string algo = "sa";
  SweepRule rule = SweepRule::kMetropolis;
  Schedule schedule;
  NmcConfig nmc;
  int64_t success_threshold = 0;
  uint64_t window = 300;
  int n_replicas = 1;
  uint64_t seed = 0;
  std::string checkpoint;
  std::string out_dir = ".";
};

int cmd_trace(const TraceOptions& opt);

// Preset < config file < flag overrides, later sources winning.
SolveOptions make_solve_options(const std::string& preset_name,
                                const KeyValueConfig& file_cfg,
                                const KeyValueConfig& overrides);
TrainOptions make_train_options(const std::string& preset_name,
                                const KeyValueConfig& file_cfg,
                                const KeyValueConfig& overrides);
GeneratorSpec make_generator_spec(const KeyValueConfig& cfg,
                                  const GeneratorSpec& base);

}  // namespace nmc
