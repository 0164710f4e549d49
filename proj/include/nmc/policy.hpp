#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmc/problem.hpp"
#include "nmc/rng.hpp"

namespace nmc {

// Architecture dimensions. The per-variable input is [state, |H|]; the global
// input is [e_best / e_scale, T] concatenated with the mean-pooled variable
// embeddings.
inline constexpr int kLocalHidden = 16;
inline constexpr int kGlobalHidden = 8;
inline constexpr int kLocalInput = 2;
inline constexpr int kGlobalInput = 2 + kLocalHidden;
inline constexpr int kMlpInput = kLocalHidden + kGlobalHidden;
inline constexpr int kMlpHidden = 8;
inline constexpr double kProbClamp = 1e-6;

inline double energy_scale(int num_vars) { return double(num_vars) / 50.0; }

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c), 0.0) {}

  double& at(int r, int c) { return a[size_t(r) * cols + c]; }
  double at(int r, int c) const { return a[size_t(r) * cols + c]; }
  size_t size() const { return a.size(); }
};

// All weights of the recurrent policy. The same struct doubles as the
// gradient / optimizer-moment container.
struct PolicyParams {
  static constexpr int kBlockCount = 27;
  // local GRU, input 2 -> hidden 16
  Mat lg_wz{kLocalHidden, kLocalInput}, lg_wr{kLocalHidden, kLocalInput},
      lg_wh{kLocalHidden, kLocalInput};
  Mat lg_uz{kLocalHidden, kLocalHidden}, lg_ur{kLocalHidden, kLocalHidden},
      lg_uh{kLocalHidden, kLocalHidden};
  Mat lg_bz{kLocalHidden, 1}, lg_br{kLocalHidden, 1}, lg_bh{kLocalHidden, 1};
  // per-factor self-attention projections
  Mat at_wq{kLocalHidden, kLocalHidden}, at_wk{kLocalHidden, kLocalHidden},
      at_wv{kLocalHidden, kLocalHidden};
  // global GRU, input 18 -> hidden 8
  Mat gg_wz{kGlobalHidden, kGlobalInput}, gg_wr{kGlobalHidden, kGlobalInput},
      gg_wh{kGlobalHidden, kGlobalInput};
  Mat gg_uz{kGlobalHidden, kGlobalHidden}, gg_ur{kGlobalHidden, kGlobalHidden},
      gg_uh{kGlobalHidden, kGlobalHidden};
  Mat gg_bz{kGlobalHidden, 1}, gg_br{kGlobalHidden, 1}, gg_bh{kGlobalHidden, 1};
  // output MLP 24 -> 8 -> 1
  Mat mlp_w1{kMlpHidden, kMlpInput}, mlp_b1{kMlpHidden, 1};
  Mat mlp_w2{1, kMlpHidden}, mlp_b2{1, 1};
  // value head 8 -> 1
  Mat val_w{1, kGlobalHidden}, val_b{1, 1};

  template <class F>
  void for_each_block(F&& f) {
    f("lg_wz", lg_wz), f("lg_wr", lg_wr), f("lg_wh", lg_wh);
    f("lg_uz", lg_uz), f("lg_ur", lg_ur), f("lg_uh", lg_uh);
    f("lg_bz", lg_bz), f("lg_br", lg_br), f("lg_bh", lg_bh);
    f("at_wq", at_wq), f("at_wk", at_wk), f("at_wv", at_wv);
    f("gg_wz", gg_wz), f("gg_wr", gg_wr), f("gg_wh", gg_wh);
    f("gg_uz", gg_uz), f("gg_ur", gg_ur), f("gg_uh", gg_uh);
    f("gg_bz", gg_bz), f("gg_br", gg_br), f("gg_bh", gg_bh);
    f("mlp_w1", mlp_w1), f("mlp_b1", mlp_b1);
    f("mlp_w2", mlp_w2), f("mlp_b2", mlp_b2);
    f("val_w", val_w), f("val_b", val_b);
  }
  template <class F>
  void for_each_block(F&& f) const {
    const_cast<PolicyParams*>(this)->for_each_block(
        [&](const char* name, Mat& m) { f(name, const_cast<const Mat&>(m)); });
  }

  size_t parameter_count() const;
  void set_zero();
  void fill(double v);
  bool all_finite() const;
  double dot(const PolicyParams& o) const;
  double squared_norm() const { return dot(*this); }
};

// Xavier-uniform weights, zero biases.
PolicyParams init_params(uint64_t seed);

// Checkpoint container: magic, version, array count, then per array
// (name, rank, dims, row-major little-endian doubles).
void save_params(std::ostream& out, const PolicyParams& p);
void save_params(const std::string& path, const PolicyParams& p);
PolicyParams load_params(std::istream& in);
PolicyParams load_params(const std::string& path);

// Recurrent memories, zero-initialized at episode start.
struct PolicyState {
  std::vector<double> h_local;                    // n * 16
  std::array<double, kGlobalHidden> h_global{};   // 8

  void reset(int num_vars) {
    h_local.assign(size_t(num_vars) * kLocalHidden, 0.0);
    h_global.fill(0.0);
  }
  int num_vars() const { return int(h_local.size() / kLocalHidden); }
};

struct PolicyInput {
  std::vector<double> state_bits;  // per variable: x (binary) or sigma (spin)
  std::vector<double> abs_fields;  // per variable: |H_i|
  double best_energy_norm = 0.0;   // e_best / e_scale(N)
  double temperature = 0.0;        // 1 / beta
};

struct PolicyOutput {
  std::vector<double> p;  // Bernoulli probabilities, clamped
  double value = 0.0;
};

// Recorded forward activations for one step, consumed by the backward pass.
struct PolicyTape {
  std::vector<double> h_in, z, r, hcand, h_new;   // n * 16 each
  std::vector<double> q, k, v;                    // n * 16 each
  std::vector<double> alpha;        // per factor, |f|^2 row-major weights
  std::vector<int32_t> alpha_offsets;             // per factor
  std::vector<double> y;                          // n * 16
  std::array<double, kLocalHidden> ybar{};
  std::array<double, kGlobalHidden> gz{}, gr{}, ghcand{}, hg_in{}, hg_new{};
  std::array<double, kGlobalInput> xg{};
  std::vector<double> mlp_hidden;                 // n * 8
  std::vector<double> logit, p_raw, p;            // n
  double value = 0.0;
};

// Deterministic forward pass. `state_out` may alias `state_in`.
PolicyOutput policy_forward(const PolicyParams& params,
                            const PolicyState& state_in,
                            const PolicyInput& input, const FactorGraph& graph,
                            PolicyState& state_out,
                            PolicyTape* tape = nullptr);

// Reverse-mode step: dp / dvalue are gradients on the clamped probabilities
// and the value output; dh_local / dh_global carry gradients on this step's
// new hidden states in and leave gradients on the entering hidden states.
void policy_backward(const PolicyParams& params, const FactorGraph& graph,
                     const PolicyInput& input, const PolicyTape& tape,
                     const std::vector<double>& dp, double dvalue,
                     std::vector<double>& dh_local,
                     std::array<double, kGlobalHidden>& dh_global,
                     PolicyParams& grad);

struct ActionSample {
  std::vector<uint8_t> mask;
  double log_prob = 0.0;
  double entropy = 0.0;
};

ActionSample sample_action(const std::vector<double>& p, Rng& rng);
double action_log_prob(const std::vector<double>& p,
                       const std::vector<uint8_t>& mask);
double action_entropy(const std::vector<double>& p);

}  // namespace nmc
