#pragma once

#include <string>
#include <vector>

#include "nmc/generate.hpp"
#include "nmc/nonlocal.hpp"
#include "nmc/train.hpp"

namespace nmc {

// Bundled benchmark defaults: generator geometry, schedule, nonlocal-move
// hyperparameters, success criterion and replica count.
struct SolvePreset {
  std::string name;
  GeneratorSpec gen;
  Schedule schedule;
  NmcConfig nmc;
  int64_t success_threshold = 0;
  int n_replicas = 1;
};

const SolvePreset* find_preset(const std::string& name);
std::vector<std::string> preset_names();

// PPO presets; schedule/NMC fields are taken from the matching solve preset.
struct TrainPreset {
  std::string name;
  std::string solve_preset;
  PpoConfig ppo;
};

const TrainPreset* find_train_preset(const std::string& name);
std::vector<std::string> train_preset_names();

}  // namespace nmc
