#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "nmc/generate.hpp"
#include "nmc/policy.hpp"

using namespace nmc;

namespace {

FactorGraph random_graph(int n, int m, uint64_t seed) {
  GeneratorSpec spec;
  spec.n = n;
  spec.m = m;
  spec.k = std::min(4, n);
  spec.seed = seed;
  return build_factor_graph(gen_ksat(spec));
}

PolicyInput random_input(int n, Rng& rng) {
  PolicyInput in;
  in.state_bits.resize(n);
  in.abs_fields.resize(n);
  for (int i = 0; i < n; ++i) {
    in.state_bits[i] = double(rng.coin());
    in.abs_fields[i] = 3.0 * rng.uniform();
  }
  in.best_energy_norm = 2.0 * rng.uniform();
  in.temperature = 0.1 + 0.4 * rng.uniform();
  return in;
}

PolicyState random_state(int n, Rng& rng) {
  PolicyState st;
  st.reset(n);
  for (double& h : st.h_local) h = rng.uniform() - 0.5;
  for (double& h : st.h_global) h = rng.uniform() - 0.5;
  return st;
}

// Scalar probe loss over a short rollout: sum_t (w . p_t + c * v_t).
double probe_loss(const PolicyParams& params, const FactorGraph& g,
                  const PolicyState& state0,
                  const std::vector<PolicyInput>& inputs,
                  const std::vector<double>& w, double c) {
  PolicyState state = state0;
  double loss = 0.0;
  for (const PolicyInput& in : inputs) {
    PolicyOutput out = policy_forward(params, state, in, g, state);
    for (size_t i = 0; i < out.p.size(); ++i) loss += w[i] * out.p[i];
    loss += c * out.value;
  }
  return loss;
}

PolicyParams probe_grad(const PolicyParams& params, const FactorGraph& g,
                        const PolicyState& state0,
                        const std::vector<PolicyInput>& inputs,
                        const std::vector<double>& w, double c) {
  int t_max = int(inputs.size());
  std::vector<PolicyTape> tapes(t_max);
  PolicyState state = state0;
  for (int t = 0; t < t_max; ++t)
    policy_forward(params, state, inputs[t], g, state, &tapes[t]);
  PolicyParams grad;
  grad.set_zero();
  std::vector<double> dh_local(size_t(g.num_vars) * kLocalHidden, 0.0);
  std::array<double, kGlobalHidden> dh_global{};
  for (int t = t_max; t-- > 0;) {
    policy_backward(params, g, inputs[t], tapes[t], w, c, dh_local, dh_global,
                    grad);
  }
  return grad;
}

}  // namespace

TEST_CASE("parameter count matches the closed-form shape sum") {
  PolicyParams p;
  // local GRU 912, attention 768, global GRU 648, MLP 209, value head 9
  CHECK(p.parameter_count() == 912 + 768 + 648 + 209 + 9);
  CHECK(p.parameter_count() == 2546);
  int blocks = 0;
  p.for_each_block([&](const char*, const Mat&) { ++blocks; });
  CHECK(blocks == PolicyParams::kBlockCount);
}

TEST_CASE("all-zero parameters: p = 1/2, v = 0, hiddens halve") {
  FactorGraph g = random_graph(8, 12, 1);
  PolicyParams params;
  params.set_zero();
  Rng rng(4);
  PolicyState st = random_state(8, rng);
  PolicyState before = st;
  PolicyInput in = random_input(8, rng);
  PolicyOutput out = policy_forward(params, st, in, g, st);
  CHECK(out.value == 0.0);
  for (double p : out.p) CHECK(p == doctest::Approx(0.5));
  for (size_t i = 0; i < st.h_local.size(); ++i)
    CHECK(st.h_local[i] == doctest::Approx(0.5 * before.h_local[i]));
  for (int i = 0; i < kGlobalHidden; ++i)
    CHECK(st.h_global[i] == doctest::Approx(0.5 * before.h_global[i]));
}

TEST_CASE("attention: zero queries give uniform weights over each factor") {
  FactorGraph g = random_graph(10, 8, 3);
  Rng rng(7);
  PolicyParams params = init_params(11);
  params.at_wq.a.assign(params.at_wq.a.size(), 0.0);  // scores vanish
  PolicyState st = random_state(10, rng);
  PolicyInput in = random_input(10, rng);
  PolicyTape tape;
  policy_forward(params, st, in, g, st, &tape);
  for (int a = 0; a < g.num_factors(); ++a) {
    int s = g.factor_size(a);
    const double* al = &tape.alpha[tape.alpha_offsets[a]];
    for (int i = 0; i < s; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < s; ++j) {
        CHECK(al[i * s + j] == doctest::Approx(1.0 / s));
        row_sum += al[i * s + j];
      }
      CHECK(row_sum == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("attention weights always sum to one within each factor") {
  FactorGraph g = random_graph(12, 20, 9);
  Rng rng(8);
  PolicyParams params = init_params(5);
  PolicyState st = random_state(12, rng);
  PolicyInput in = random_input(12, rng);
  PolicyTape tape;
  policy_forward(params, st, in, g, st, &tape);
  for (int a = 0; a < g.num_factors(); ++a) {
    int s = g.factor_size(a);
    const double* al = &tape.alpha[tape.alpha_offsets[a]];
    for (int i = 0; i < s; ++i) {
      double row = 0.0;
      for (int j = 0; j < s; ++j) row += al[i * s + j];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("isolated variables aggregate to zero and stay finite") {
  // one clause over variables 0..3; variable 4 is isolated
  CnfFormula f(5, {make_clause({Literal{0, false}, Literal{1, true},
                                Literal{2, false}, Literal{3, true}})});
  FactorGraph g = build_factor_graph(f);
  Rng rng(12);
  PolicyParams params = init_params(2);
  PolicyState st = random_state(5, rng);
  PolicyInput in = random_input(5, rng);
  PolicyTape tape;
  PolicyOutput out = policy_forward(params, st, in, g, st, &tape);
  for (int d = 0; d < kLocalHidden; ++d)
    CHECK(tape.y[4 * kLocalHidden + d] == 0.0);
  for (double p : out.p) {
    CHECK(std::isfinite(p));
    CHECK(p >= kProbClamp);
    CHECK(p <= 1.0 - kProbClamp);
  }
}

TEST_CASE("permutation equivariance: relabeling variables permutes p") {
  const int n = 9;
  GeneratorSpec spec;
  spec.n = n;
  spec.m = 14;
  spec.seed = 23;
  CnfFormula f = gen_ksat(spec);
  FactorGraph g = build_factor_graph(f);

  // permuted formula: variable i -> perm[i]
  std::vector<VarIndex> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng prng(55);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[prng.below(uint64_t(i) + 1)]);
  std::vector<Clause> permuted;
  for (const Clause& c : f.clauses()) {
    std::vector<Literal> lits;
    for (const Literal& l : c.lits) lits.push_back({perm[l.var], l.negated});
    permuted.push_back(make_clause(std::move(lits)));
  }
  FactorGraph g2 = build_factor_graph(CnfFormula(n, std::move(permuted)));

  Rng rng(3);
  PolicyParams params = init_params(17);
  PolicyState st = random_state(n, rng);
  PolicyInput in = random_input(n, rng);

  PolicyState st2;
  st2.reset(n);
  PolicyInput in2 = in;
  for (int i = 0; i < n; ++i) {
    in2.state_bits[perm[i]] = in.state_bits[i];
    in2.abs_fields[perm[i]] = in.abs_fields[i];
    for (int d = 0; d < kLocalHidden; ++d)
      st2.h_local[size_t(perm[i]) * kLocalHidden + d] =
          st.h_local[size_t(i) * kLocalHidden + d];
  }
  st2.h_global = st.h_global;

  PolicyOutput out = policy_forward(params, st, in, g, st);
  PolicyOutput out2 = policy_forward(params, st2, in2, g2, st2);
  CHECK(out.value == doctest::Approx(out2.value).epsilon(1e-9));
  for (int i = 0; i < n; ++i)
    CHECK(out.p[i] == doctest::Approx(out2.p[perm[i]]).epsilon(1e-9));
}

TEST_CASE("forward is deterministic") {
  FactorGraph g = random_graph(10, 15, 2);
  Rng rng(9);
  PolicyParams params = init_params(1);
  PolicyState st = random_state(10, rng);
  PolicyInput in = random_input(10, rng);
  PolicyState a = st, b = st;
  PolicyOutput oa = policy_forward(params, a, in, g, a);
  PolicyOutput ob = policy_forward(params, b, in, g, b);
  CHECK(oa.p == ob.p);
  CHECK(oa.value == ob.value);
  CHECK(a.h_local == b.h_local);
}

TEST_CASE("sample_action: log-probabilities and clamp bound") {
  std::vector<double> p(4, 0.5);
  Rng rng(31);
  for (int t = 0; t < 8; ++t) {
    ActionSample s = sample_action(p, rng);
    CHECK(s.log_prob == doctest::Approx(4.0 * std::log(0.5)));
    CHECK(s.log_prob == doctest::Approx(-2.772588722239781));
  }
  // clamp keeps joint log-probs bounded: |logp| <= N ln(1e6)
  std::vector<double> extreme(50);
  for (size_t i = 0; i < extreme.size(); ++i)
    extreme[i] = i % 2 ? 1.0 - kProbClamp : kProbClamp;
  for (int t = 0; t < 20; ++t) {
    ActionSample s = sample_action(extreme, rng);
    CHECK(std::abs(s.log_prob) <= 50.0 * std::log(1e6) + 1e-9);
  }
  // a bit at the upper clamp is almost surely one
  std::vector<double> sure(1, 1.0 - kProbClamp);
  int ones = 0;
  for (int t = 0; t < 1000; ++t) ones += sample_action(sure, rng).mask[0];
  CHECK(ones == 1000);
}

TEST_CASE("sample_action: frequencies match product probabilities") {
  std::vector<double> p = {0.2, 0.7, 0.45};
  Rng rng(77);
  std::vector<int> counts(8, 0);
  const int kDraws = 100000;
  for (int t = 0; t < kDraws; ++t) {
    ActionSample s = sample_action(p, rng);
    int idx = s.mask[0] | (s.mask[1] << 1) | (s.mask[2] << 2);
    ++counts[idx];
  }
  for (int m = 0; m < 8; ++m) {
    double prob = 1.0;
    for (int i = 0; i < 3; ++i) {
      bool bit = (m >> i) & 1;
      prob *= bit ? p[i] : 1.0 - p[i];
    }
    double sigma = std::sqrt(prob * (1.0 - prob) * kDraws);
    CHECK(std::abs(counts[m] - prob * kDraws) < 3.0 * sigma + 1.0);
  }
}

TEST_CASE("entropy of a Bernoulli vector") {
  std::vector<double> p = {0.5, 0.5};
  CHECK(action_entropy(p) == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("value-head gradient is the global hidden activation") {
  FactorGraph g = random_graph(7, 10, 6);
  Rng rng(14);
  PolicyParams params = init_params(3);
  PolicyState st = random_state(7, rng);
  PolicyInput in = random_input(7, rng);
  PolicyTape tape;
  PolicyState out_state = st;
  policy_forward(params, st, in, g, out_state, &tape);

  PolicyParams grad;
  grad.set_zero();
  std::vector<double> dp(7, 0.0);
  std::vector<double> dh_local(7 * kLocalHidden, 0.0);
  std::array<double, kGlobalHidden> dh_global{};
  policy_backward(params, g, in, tape, dp, 1.0, dh_local, dh_global, grad);
  for (int d = 0; d < kGlobalHidden; ++d)
    CHECK(grad.val_w.a[d] == doctest::Approx(tape.hg_new[d]));
  CHECK(grad.val_b.a[0] == doctest::Approx(1.0));
}

TEST_CASE("constant loss has zero gradient") {
  FactorGraph g = random_graph(7, 10, 6);
  Rng rng(15);
  PolicyParams params = init_params(4);
  PolicyState st = random_state(7, rng);
  PolicyInput in = random_input(7, rng);
  PolicyTape tape;
  PolicyState out_state = st;
  policy_forward(params, st, in, g, out_state, &tape);
  PolicyParams grad;
  grad.set_zero();
  std::vector<double> dp(7, 0.0);
  std::vector<double> dh_local(7 * kLocalHidden, 0.0);
  std::array<double, kGlobalHidden> dh_global{};
  policy_backward(params, g, in, tape, dp, 0.0, dh_local, dh_global, grad);
  CHECK(grad.squared_norm() == 0.0);
}

TEST_CASE("analytic gradients match central differences through 3 steps") {
  for (uint64_t cfg_seed : {101ull, 202ull, 303ull}) {
    FactorGraph g = random_graph(6, 4, cfg_seed);
    Rng rng(cfg_seed + 9);
    PolicyParams params = init_params(cfg_seed);
    PolicyState st0 = random_state(6, rng);
    std::vector<PolicyInput> inputs;
    for (int t = 0; t < 3; ++t) inputs.push_back(random_input(6, rng));
    std::vector<double> w(6);
    for (double& x : w) x = rng.uniform() * 2.0 - 1.0;
    double c = rng.uniform() * 2.0 - 1.0;

    PolicyParams analytic = probe_grad(params, g, st0, inputs, w, c);

    const double h = 1e-5;
    double worst = 0.0;
    PolicyParams probe = params;
    const Mat* ga[PolicyParams::kBlockCount];
    int bi = 0;
    analytic.for_each_block([&](const char*, const Mat& m) { ga[bi++] = &m; });
    bi = 0;
    probe.for_each_block([&](const char* name, Mat& m) {
      const Mat& gm = *ga[bi++];
      for (size_t j = 0; j < m.a.size(); ++j) {
        double saved = m.a[j];
        m.a[j] = saved + h;
        double up = probe_loss(probe, g, st0, inputs, w, c);
        m.a[j] = saved - h;
        double down = probe_loss(probe, g, st0, inputs, w, c);
        m.a[j] = saved;
        double fd = (up - down) / (2.0 * h);
        double an = gm.a[j];
        double rel = std::abs(fd - an) /
                     std::max({std::abs(fd), std::abs(an), 1e-4});
        if (rel > worst) worst = rel;
        if (rel >= 1e-5) {
          CAPTURE(name);
          CAPTURE(j);
          CAPTURE(fd);
          CAPTURE(an);
          CHECK(rel < 1e-5);
        }
      }
    });
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("init_params: seeded, bounded, zero biases") {
  PolicyParams a = init_params(42);
  PolicyParams b = init_params(42);
  PolicyParams c = init_params(43);
  CHECK(a.dot(b) == doctest::Approx(a.squared_norm()));
  CHECK(a.squared_norm() > 0.0);
  CHECK(a.dot(c) != a.squared_norm());
  a.for_each_block([&](const char*, const Mat& m) {
    if (m.cols == 1) {
      for (double x : m.a) CHECK(x == 0.0);
    } else {
      double bound = std::sqrt(6.0 / double(m.rows + m.cols));
      for (double x : m.a) {
        CHECK(x <= bound);
        CHECK(x >= -bound);
      }
    }
  });
}

TEST_CASE("checkpoints: bitwise round trip and corruption errors") {
  PolicyParams p = init_params(7);
  std::stringstream buf;
  save_params(buf, p);
  std::string bytes = buf.str();
  {
    std::istringstream in(bytes);
    PolicyParams q = load_params(in);
    CHECK(q.dot(q) == p.dot(p));
    bool identical = true;
    const Mat* blocks[PolicyParams::kBlockCount];
    int bi = 0;
    q.for_each_block([&](const char*, const Mat& m) { blocks[bi++] = &m; });
    bi = 0;
    p.for_each_block([&](const char*, const Mat& m) {
      identical = identical && m.a == blocks[bi++]->a;
    });
    CHECK(identical);
  }
  {
    std::istringstream in(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_params(in), std::runtime_error);
  }
  {
    std::string garbage = "not a checkpoint at all";
    std::istringstream in(garbage);
    CHECK_THROWS_WITH_AS(load_params(in), doctest::Contains("magic"),
                         std::runtime_error);
  }
}
