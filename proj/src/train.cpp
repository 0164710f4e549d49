#include "nmc/train.hpp"

#include <algorithm>
#include <cmath>

namespace nmc {

void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<uint8_t>& done, double bootstrap_value, double gamma,
         double lambda, std::vector<double>& adv, std::vector<double>& ret) {
  size_t t_max = rewards.size();
  if (values.size() != t_max || done.size() != t_max)
    throw DimensionError("gae inputs must have equal lengths");
  adv.assign(t_max, 0.0);
  ret.assign(t_max, 0.0);
  double carry = 0.0;
  for (size_t i = t_max; i-- > 0;) {
    double not_done = done[i] ? 0.0 : 1.0;
    double v_next = (i + 1 < t_max) ? values[i + 1] : bootstrap_value;
    double delta = rewards[i] + gamma * v_next * not_done - values[i];
    carry = delta + gamma * lambda * not_done * carry;
    adv[i] = carry;
    ret[i] = adv[i] + values[i];
  }
}

void PpoConfig::validate() const {
  schedule.validate();
  nmc.validate(schedule);
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ConfigError("gamma must lie in [0, 1]");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0))
    throw ConfigError("lambda_gae must lie in [0, 1]");
  if (!(eps_clip > 0.0 && eps_clip < 1.0))
    throw ConfigError("eps_clip must lie in (0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (n_replicas < 1) throw ConfigError("n_replicas must be positive");
  if (minibatch_sequences < 1 || minibatch_sequences > n_replicas)
    throw ConfigError("minibatch must lie in [1, n_replicas]");
  if (n_steps_per_update < 1)
    throw ConfigError("n_steps_per_update must be positive");
  if (nmc.n_steps % n_steps_per_update != 0)
    throw ConfigError("n_steps_per_update must divide the NMC step count");
  if (n_eps < 1) throw ConfigError("n_eps must be positive");
  if (n_train_reps < 0) throw ConfigError("n_train_reps must be >= 0");
}

void RolloutSequence::clear() {
  inputs.clear();
  actions.clear();
  old_logp.clear();
  old_value.clear();
  reward.clear();
  advantage.clear();
  returns.clear();
  done.clear();
}

// ---------------------------------------------------------------------------
// Sequence loss + gradient
// ---------------------------------------------------------------------------

PpoLossTerms ppo_sequence_loss(const PolicyParams& params,
                               const FactorGraph& graph,
                               const RolloutSequence& seq, double adv_mean,
                               double adv_scale, const PpoConfig& cfg,
                               double inv_count, PolicyParams* grad) {
  int t_max = seq.length();
  PpoLossTerms terms;
  if (t_max == 0) return terms;

  std::vector<PolicyTape> tapes(t_max);
  std::vector<std::vector<double>> dp(t_max);
  std::vector<double> dvalue(t_max, 0.0);

  PolicyState state = seq.entry_state;
  for (int t = 0; t < t_max; ++t) {
    policy_forward(params, state, seq.inputs[t], graph, state, &tapes[t]);
    if (seq.done[t]) state.reset(graph.num_vars);
  }

  for (int t = 0; t < t_max; ++t) {
    const PolicyTape& tape = tapes[t];
    const std::vector<uint8_t>& action = seq.actions[t];
    double logp_new = action_log_prob(tape.p, action);
    double ratio = std::exp(logp_new - seq.old_logp[t]);
    terms.max_ratio_dev =
        std::max(terms.max_ratio_dev, std::abs(ratio - 1.0));
    double adv_hat = (seq.advantage[t] - adv_mean) / adv_scale;
    double clip_obj = ppo_clip_objective(ratio, adv_hat, cfg.eps_clip);
    terms.policy += -clip_obj * inv_count;

    double v = tape.value;
    double v_old = seq.old_value[t];
    double v_clip =
        v_old + std::clamp(v - v_old, -cfg.eps_clip, cfg.eps_clip);
    double l_plain = (v - seq.returns[t]) * (v - seq.returns[t]);
    double l_clip = (v_clip - seq.returns[t]) * (v_clip - seq.returns[t]);
    terms.value += 0.5 * std::max(l_plain, l_clip) * inv_count;

    double h = action_entropy(tape.p);
    terms.entropy += h * inv_count;

    if (grad) {
      auto& dpt = dp[t];
      dpt.assign(tape.p.size(), 0.0);
      // policy term: d/dlogp of -min(ratio * A, g) is -ratio * A on the
      // unclipped branch, zero when the clip is active
      double unclipped = ratio * adv_hat;
      double dlogp = unclipped <= clip_obj ? -unclipped * inv_count : 0.0;
      for (size_t i = 0; i < tape.p.size(); ++i) {
        double pi = tape.p[i];
        double dlp_dpi = action[i] ? 1.0 / pi : -1.0 / (1.0 - pi);
        dpt[i] += dlogp * dlp_dpi;
        // entropy bonus: dH/dp = log((1-p)/p)
        dpt[i] += -cfg.c_ent * inv_count * std::log((1.0 - pi) / pi);
      }
      if (l_plain >= l_clip) {
        dvalue[t] = cfg.c_vf * (v - seq.returns[t]) * inv_count;
      } else {
        bool inside = std::abs(v - v_old) < cfg.eps_clip;
        dvalue[t] =
            inside ? cfg.c_vf * (v_clip - seq.returns[t]) * inv_count : 0.0;
      }
    }
  }
  terms.total = terms.policy + cfg.c_vf * terms.value - cfg.c_ent * terms.entropy;

  if (grad) {
    std::vector<double> dh_local(size_t(graph.num_vars) * kLocalHidden, 0.0);
    std::array<double, kGlobalHidden> dh_global{};
    for (int t = t_max; t-- > 0;) {
      if (t == t_max - 1 || seq.done[t]) {
        std::fill(dh_local.begin(), dh_local.end(), 0.0);
        dh_global.fill(0.0);
      }
      policy_backward(params, graph, seq.inputs[t], tapes[t], dp[t], dvalue[t],
                      dh_local, dh_global, *grad);
    }
  }
  return terms;
}

double clip_grad_norm(PolicyParams& grad, double max_norm) {
  double norm = std::sqrt(grad.squared_norm());
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    grad.for_each_block([&](const char*, Mat& m) {
      for (double& x : m.a) x *= scale;
    });
  }
  return norm;
}

void adam_step(PolicyParams& params, const PolicyParams& grad, AdamState& st,
               double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-5;
  ++st.t;
  double c1 = 1.0 - std::pow(b1, double(st.t));
  double c2 = 1.0 - std::pow(b2, double(st.t));
  const Mat* gblocks[PolicyParams::kBlockCount];
  Mat* mblocks[PolicyParams::kBlockCount];
  Mat* vblocks[PolicyParams::kBlockCount];
  int idx = 0;
  grad.for_each_block([&](const char*, const Mat& m) { gblocks[idx++] = &m; });
  idx = 0;
  st.m.for_each_block([&](const char*, Mat& m) { mblocks[idx++] = &m; });
  idx = 0;
  st.v.for_each_block([&](const char*, Mat& m) { vblocks[idx++] = &m; });
  idx = 0;
  params.for_each_block([&](const char*, Mat& pm) {
    const Mat& g = *gblocks[idx];
    Mat& m = *mblocks[idx];
    Mat& v = *vblocks[idx];
    ++idx;
    for (size_t j = 0; j < pm.a.size(); ++j) {
      m.a[j] = b1 * m.a[j] + (1.0 - b1) * g.a[j];
      v.a[j] = b2 * v.a[j] + (1.0 - b2) * g.a[j] * g.a[j];
      double mhat = m.a[j] / c1;
      double vhat = v.a[j] / c2;
      pm.a[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  });
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

struct UpdateOutcome {
  PpoLossTerms mean_terms;
  double grad_norm = 0.0;
  double max_ratio_dev_first_batch = 0.0;
  bool finite = true;
};

UpdateOutcome ppo_update(PolicyParams& params, AdamState& adam,
                         const FactorGraph& graph,
                         std::vector<RolloutSequence>& seqs,
                         const PpoConfig& cfg, double lr, uint64_t seed,
                         int update_idx) {
  UpdateOutcome out;
  int n_seq = int(seqs.size());
  int mb_size = std::min(cfg.minibatch_sequences, n_seq);
  int n_mb = n_seq / mb_size;
  Rng shuffle_rng = Rng::keyed(seed, uint64_t(update_idx), kStreamShuffle);
  std::vector<int> order(n_seq);
  for (int i = 0; i < n_seq; ++i) order[i] = i;

  std::vector<PolicyParams> seq_grads(mb_size);
  std::vector<PpoLossTerms> seq_terms(mb_size);
  PolicyParams grad;
  int n_batches = 0;
  PpoLossTerms accum;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates shuffle of the sequence order
    for (int i = n_seq - 1; i > 0; --i) {
      int j = int(shuffle_rng.below(uint64_t(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int mb = 0; mb < n_mb; ++mb) {
      const int* sel = &order[size_t(mb) * mb_size];
      int64_t count = 0;
      double mean = 0.0;
      for (int s = 0; s < mb_size; ++s) {
        const RolloutSequence& seq = seqs[sel[s]];
        for (double a : seq.advantage) mean += a;
        count += seq.length();
      }
      mean /= double(count);
      double var = 0.0;
      for (int s = 0; s < mb_size; ++s)
        for (double a : seqs[sel[s]].advantage) var += (a - mean) * (a - mean);
      double scale = std::sqrt(var / double(count)) + 1e-8;
      double inv_count = 1.0 / double(count);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cfg.threads != 1)
#endif
      for (int s = 0; s < mb_size; ++s) {
        seq_grads[s].set_zero();
        seq_terms[s] =
            ppo_sequence_loss(params, graph, seqs[sel[s]], mean, scale, cfg,
                              inv_count, &seq_grads[s]);
      }
      grad.set_zero();
      PpoLossTerms batch;
      for (int s = 0; s < mb_size; ++s) {
        const PolicyParams& gs = seq_grads[s];
        int idx = 0;
        const Mat* blocks[PolicyParams::kBlockCount];
        gs.for_each_block([&](const char*, const Mat& m) { blocks[idx++] = &m; });
        idx = 0;
        grad.for_each_block([&](const char*, Mat& m) {
          const Mat& src = *blocks[idx++];
          for (size_t j = 0; j < m.a.size(); ++j) m.a[j] += src.a[j];
        });
        batch.total += seq_terms[s].total;
        batch.policy += seq_terms[s].policy;
        batch.value += seq_terms[s].value;
        batch.entropy += seq_terms[s].entropy;
        batch.max_ratio_dev =
            std::max(batch.max_ratio_dev, seq_terms[s].max_ratio_dev);
      }
      if (epoch == 0 && mb == 0)
        out.max_ratio_dev_first_batch = batch.max_ratio_dev;
      if (!std::isfinite(batch.total)) {
        out.finite = false;
        return out;
      }
      out.grad_norm = clip_grad_norm(grad, cfg.max_grad_norm);
      adam_step(params, grad, adam, lr);
      accum.total += batch.total;
      accum.policy += batch.policy;
      accum.value += batch.value;
      accum.entropy += batch.entropy;
      ++n_batches;
    }
  }
  if (n_batches > 0) {
    accum.total /= n_batches;
    accum.policy /= n_batches;
    accum.value /= n_batches;
    accum.entropy /= n_batches;
  }
  out.mean_terms = accum;
  out.finite = out.finite && params.all_finite();
  return out;
}

}  // namespace

TrainResult train_rlnmc(const std::vector<const CnfProblem*>& instances,
                        const PpoConfig& cfg, uint64_t seed,
                        const CheckpointCallback& checkpoint_cb) {
  cfg.validate();
  if (instances.empty()) throw ConfigError("training requires instances");

  TrainResult result;
  result.params = init_params(seed);
  result.total_updates = cfg.total_updates(int(instances.size()));
  if (cfg.n_train_reps == 0) return result;

  AdamState adam;
  int update_idx = 0;
  uint64_t episode_counter = 0;
  uint64_t sa_sweeps = nmc_sa_phase_sweeps(cfg.schedule, cfg.nmc);
  int updates_per_ep = cfg.updates_per_episode();

  for (int rep = 0; rep < cfg.n_train_reps && !result.diverged; ++rep) {
    for (size_t inst = 0; inst < instances.size() && !result.diverged; ++inst) {
      const CnfProblem& problem = *instances[inst];
      const FactorGraph& graph = problem.graph();
      int n = problem.num_vars();
      for (int ep = 0; ep < cfg.n_eps && !result.diverged; ++ep) {
        ++episode_counter;
        // fresh replicas: random state annealed to the NMC temperature
        std::vector<Chain<CnfProblem>> chains;
        chains.reserve(cfg.n_replicas);
        for (int r = 0; r < cfg.n_replicas; ++r) {
          Rng rng = Rng::keyed(seed, (episode_counter << 20) | uint64_t(r),
                               kStreamChain);
          Assignment a = random_assignment(problem, rng);
          chains.emplace_back(problem, std::move(a), rng,
                              int64_t(cfg.success_threshold));
        }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cfg.threads != 1)
#endif
        for (int r = 0; r < cfg.n_replicas; ++r) {
          for (uint64_t t = 0; t < sa_sweeps; ++t)
            sweep(chains[r], nmc_phase1_beta(cfg.schedule, cfg.nmc, sa_sweeps, t),
                  cfg.rule);
        }
        std::vector<PolicyState> pstates(cfg.n_replicas);
        std::vector<double> e_best(cfg.n_replicas);
        for (int r = 0; r < cfg.n_replicas; ++r) {
          pstates[r].reset(n);
          e_best[r] = double(chains[r].state.energy());
        }
        std::vector<RolloutSequence> seqs(cfg.n_replicas);

        for (int u = 0; u < updates_per_ep && !result.diverged; ++u) {
          for (int r = 0; r < cfg.n_replicas; ++r) {
            seqs[r].clear();
            seqs[r].entry_state = pstates[r];
          }
          std::vector<double> bootstrap(cfg.n_replicas, 0.0);
          for (int k = 0; k < cfg.n_steps_per_update; ++k) {
            int step = u * cfg.n_steps_per_update + k;
            double beta = nmc_jump_beta(cfg.schedule, cfg.nmc, step);
            bool last_step_of_episode = step == cfg.nmc.n_steps - 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cfg.threads != 1)
#endif
            for (int r = 0; r < cfg.n_replicas; ++r) {
              Chain<CnfProblem>& chain = chains[r];
              PolicyInput input = make_policy_input(chain, beta, e_best[r]);
              PolicyOutput pout = policy_forward(result.params, pstates[r],
                                                 input, graph, pstates[r]);
              ActionSample act = sample_action(pout.p, chain.rng);
              nmc_jump(chain, act.mask, beta, cfg.nmc, cfg.rule, step);
              double e_new = double(chain.state.energy());
              double rwd = compute_reward(e_new, e_best[r]);
              e_best[r] = std::min(e_best[r], e_new);
              bool success = e_new <= cfg.success_threshold;
              RolloutSequence& s = seqs[r];
              s.inputs.push_back(std::move(input));
              s.actions.push_back(act.mask);
              s.old_logp.push_back(act.log_prob);
              s.old_value.push_back(pout.value);
              s.reward.push_back(rwd);
              s.done.push_back(success || last_step_of_episode ? 1 : 0);
              if (success && !last_step_of_episode) {
                // episode restart for this replica
                chain.state.set_assignment(random_assignment(problem, chain.rng));
                for (uint64_t t = 0; t < sa_sweeps; ++t)
                  sweep(chain,
                        nmc_phase1_beta(cfg.schedule, cfg.nmc, sa_sweeps, t),
                        cfg.rule);
                pstates[r].reset(n);
                e_best[r] = double(chain.state.energy());
              }
              if (k == cfg.n_steps_per_update - 1 && !s.done.back()) {
                // bootstrap value of the state entering the next segment
                double next_beta =
                    nmc_jump_beta(cfg.schedule, cfg.nmc, step + 1);
                PolicyInput bin = make_policy_input(chain, next_beta, e_best[r]);
                PolicyState tmp = pstates[r];
                PolicyOutput bout =
                    policy_forward(result.params, tmp, bin, graph, tmp);
                bootstrap[r] = bout.value;
              }
            }
          }
          double reward_sum = 0.0;
          int64_t reward_count = 0;
          double mask_sum = 0.0;
          int64_t mask_count = 0;
          for (int r = 0; r < cfg.n_replicas; ++r) {
            RolloutSequence& s = seqs[r];
            gae(s.reward, s.old_value, s.done, bootstrap[r], cfg.gamma,
                cfg.lambda_gae, s.advantage, s.returns);
            for (double rw : s.reward) reward_sum += rw;
            reward_count += s.length();
            for (const auto& action : s.actions) {
              for (uint8_t bit : action) mask_sum += bit;
              mask_count += int64_t(action.size());
            }
          }
          double frac = result.total_updates > 1
                            ? double(update_idx) / double(result.total_updates - 1)
                            : 0.0;
          double lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
          PolicyParams before_update = result.params;
          UpdateOutcome outcome = ppo_update(result.params, adam, graph, seqs,
                                             cfg, lr, seed, update_idx);
          if (!outcome.finite) {
            result.params = before_update;  // last good parameters
            result.diverged = true;
            break;
          }
          TrainLogRow row;
          row.update = update_idx;
          row.mean_reward = reward_sum / double(reward_count);
          row.policy_loss = outcome.mean_terms.policy;
          row.value_loss = outcome.mean_terms.value;
          row.entropy = outcome.mean_terms.entropy;
          row.learning_rate = lr;
          row.grad_norm = outcome.grad_norm;
          row.max_ratio_dev_first_batch = outcome.max_ratio_dev_first_batch;
          row.mean_mask_fraction = mask_sum / double(mask_count);
          result.log.push_back(row);
          ++update_idx;
          if (checkpoint_cb && cfg.checkpoint_every > 0 &&
              update_idx % cfg.checkpoint_every == 0)
            checkpoint_cb(update_idx, result.params);
        }
      }
    }
  }
  if (checkpoint_cb) checkpoint_cb(update_idx, result.params);
  return result;
}

}  // namespace nmc
