#pragma once

#include <functional>

#include "nmc/nonlocal.hpp"
#include "nmc/policy.hpp"

namespace nmc {

// Reward for the transition into a state of energy e_new given the episode's
// running best e_best: the improvement over the best, zero otherwise.
inline double compute_reward(double e_new, double e_best) {
  double d = e_new - e_best;
  return d > 0.0 ? 0.0 : -d;
}

// Generalized advantage estimation by backward recursion; `done` flags zero
// the bootstrap across episode restarts. returns[t] = adv[t] + values[t].
void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<uint8_t>& done, double bootstrap_value, double gamma,
         double lambda, std::vector<double>& adv, std::vector<double>& ret);

// min(ratio * A, g(eps, A)) with g(eps, A) = (1 +- eps) A.
inline double ppo_clip_objective(double ratio, double advantage, double eps) {
  double g = advantage > 0.0 ? (1.0 + eps) * advantage : (1.0 - eps) * advantage;
  return std::min(ratio * advantage, g);
}

struct PpoConfig {
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  int epochs = 5;
  int minibatch_sequences = 64;  // replica sequences per minibatch
  int n_replicas = 128;
  int n_steps_per_update = 10;
  int n_eps = 2;        // episodes per instance per repetition
  int n_train_reps = 4; // passes over the instance set
  double gamma = 0.75;
  double lambda_gae = 0.95;
  double c_vf = 0.25;
  double c_ent = 1e-3;
  double eps_clip = 0.25;
  double max_grad_norm = 0.5;
  int checkpoint_every = 0;  // updates between checkpoint callbacks, 0 = off

  Schedule schedule;
  NmcConfig nmc;
  SweepRule rule = SweepRule::kMetropolis;
  double success_threshold = 0.0;
  int threads = 0;

  int updates_per_episode() const { return nmc.n_steps / n_steps_per_update; }
  int total_updates(int n_instances) const {
    return n_train_reps * n_instances * n_eps * updates_per_episode();
  }
  void validate() const;
};

// Time-contiguous rollout segment of one replica.
struct RolloutSequence {
  PolicyState entry_state;
  std::vector<PolicyInput> inputs;
  std::vector<std::vector<uint8_t>> actions;
  std::vector<double> old_logp;
  std::vector<double> old_value;
  std::vector<double> reward;
  std::vector<double> advantage;  // raw GAE advantages
  std::vector<double> returns;
  std::vector<uint8_t> done;

  int length() const { return int(inputs.size()); }
  void clear();
};

struct PpoLossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double max_ratio_dev = 0.0;  // max |ratio - 1| over the sequence
};

// Loss of one sequence under the current params, with advantages normalized
// as (A - adv_mean) / adv_scale. Contributions are scaled by inv_count so
// that summing sequences yields minibatch means. When `grad` is non-null the
// exact gradient is accumulated into it (gradients truncated at the segment
// boundary).
PpoLossTerms ppo_sequence_loss(const PolicyParams& params,
                               const FactorGraph& graph,
                               const RolloutSequence& seq, double adv_mean,
                               double adv_scale, const PpoConfig& cfg,
                               double inv_count, PolicyParams* grad);

// Rescales the gradient to the cap when its global norm exceeds it; returns
// the pre-clip norm.
double clip_grad_norm(PolicyParams& grad, double max_norm);

struct AdamState {
  PolicyParams m, v;
  int64_t t = 0;
  AdamState() {
    m.set_zero();
    v.set_zero();
  }
};

void adam_step(PolicyParams& params, const PolicyParams& grad, AdamState& st,
               double lr);

struct TrainResult {
  PolicyParams params;
  std::vector<TrainLogRow> log;
  bool diverged = false;
  int total_updates = 0;
};

using CheckpointCallback =
    std::function<void(int update, const PolicyParams& params)>;

// Full RLNMC training loop: per episode, replicas anneal from beta_i to
// beta_nmc and then take policy-driven jumps; PPO updates run every
// n_steps_per_update steps with a linearly interpolated learning rate.
TrainResult train_rlnmc(const std::vector<const CnfProblem*>& instances,
                        const PpoConfig& cfg, uint64_t seed,
                        const CheckpointCallback& checkpoint_cb = {});

// Shared with run_nmc: policy input snapshot of a chain.
template <class P>
PolicyInput make_policy_input(const Chain<P>& chain, double beta,
                              double e_best) {
  int n = chain.num_vars();
  PolicyInput in;
  in.state_bits.resize(n);
  in.abs_fields.resize(n);
  bool spin = chain.domain == VarDomain::kSpin;
  for (int i = 0; i < n; ++i) {
    uint8_t bit = chain.state.assignment()[i];
    in.state_bits[i] = spin ? double(spin_of(bit)) : double(bit);
    in.abs_fields[i] = std::abs(chain.state.local_field(i));
  }
  in.best_energy_norm = e_best / energy_scale(n);
  in.temperature = 1.0 / beta;
  return in;
}

// Policy-driven backbone selection for solve-mode runs.
template <class P>
class RlSelector : public BackboneSelector<P> {
 public:
  RlSelector(const PolicyParams& params, const FactorGraph& graph)
      : params_(params), graph_(graph) {}

  void begin_replica(Chain<P>& chain) override {
    state_.reset(chain.num_vars());
    e_best_ = double(chain.state.energy());
  }

  BackboneMask select(Chain<P>& chain, double beta, int step) override {
    PolicyInput in = make_policy_input(chain, beta, e_best_);
    PolicyOutput out = policy_forward(params_, state_, in, graph_, state_);
    return sample_action(out.p, chain.rng).mask;
  }

  void on_jump_result(double energy) override {
    e_best_ = std::min(e_best_, energy);
  }

 private:
  const PolicyParams& params_;
  const FactorGraph& graph_;
  PolicyState state_;
  double e_best_ = 0.0;
};

}  // namespace nmc
