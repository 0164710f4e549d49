#include "nmc/generate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nmc/problem.hpp"

namespace nmc {

int GeneratorSpec::clauses_for_ratio(int n, double alpha) {
  return int(std::llround(alpha * n));
}

namespace {

// Number of distinct clauses (unordered literal sets over k distinct
// variables), saturated to avoid overflow.
double distinct_clause_count(int n, int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c *= double(n - i) / double(i + 1);
  return c * std::pow(2.0, k);
}

}  // namespace

void GeneratorSpec::validate() const {
  if (n < 1) throw GenerationError("generator requires n >= 1");
  if (k < 1 || k > n) throw GenerationError("generator requires 1 <= k <= n");
  if (m < 0) throw GenerationError("generator requires m >= 0");
  if (family == ClauseFamily::kScaleFree && !(b > 2.0))
    throw GenerationError("scale-free exponent must satisfy b > 2");
  if (double(m) > distinct_clause_count(n, k))
    throw GenerationError("more distinct clauses requested than exist");
  if (require_satisfiable && n > 24)
    throw GenerationError("satisfiability filter is limited to n <= 24");
}

std::vector<double> scalefree_weights(int n, double b) {
  if (!(b > 2.0))
    throw GenerationError("scale-free exponent must satisfy b > 2");
  std::vector<double> w(n);
  double prefactor = (b - 2.0) / (b - 1.0) / double(n);
  double expo = 1.0 / (b - 1.0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = prefactor * std::pow(double(n) / double(i + 1), expo);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

namespace {

using ClauseKey = std::vector<Literal>;

constexpr int64_t kMaxRejections = 10'000'000;

Clause draw_uniform_clause(int n, int k, Rng& rng) {
  std::vector<Literal> lits;
  lits.reserve(k);
  while (int(lits.size()) < k) {
    VarIndex v = VarIndex(rng.below(uint64_t(n)));
    bool dup = false;
    for (const Literal& l : lits) dup |= l.var == v;
    if (dup) continue;
    lits.push_back(Literal{v, rng.coin()});
  }
  return make_clause(std::move(lits));
}

// Sequential weighted draws without replacement.
Clause draw_weighted_clause(const std::vector<double>& w, int k, Rng& rng) {
  int n = int(w.size());
  std::vector<Literal> lits;
  lits.reserve(k);
  std::vector<uint8_t> taken(n, 0);
  double remaining = 1.0;
  for (int j = 0; j < k; ++j) {
    double u = rng.uniform() * remaining;
    double acc = 0.0;
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      acc += w[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick < 0) {  // guard against accumulated rounding at the tail
      for (int i = n - 1; i >= 0; --i)
        if (!taken[i]) {
          pick = i;
          break;
        }
    }
    taken[pick] = 1;
    remaining -= w[pick];
    lits.push_back(Literal{VarIndex(pick), rng.coin()});
  }
  return make_clause(std::move(lits));
}

CnfFormula generate(const GeneratorSpec& spec, Rng& rng) {
  std::vector<double> weights;
  if (spec.family == ClauseFamily::kScaleFree)
    weights = scalefree_weights(spec.n, spec.b);
  std::set<ClauseKey> seen;
  std::vector<Clause> clauses;
  clauses.reserve(spec.m);
  int64_t rejections = 0;
  while (int(clauses.size()) < spec.m) {
    Clause c = spec.family == ClauseFamily::kUniform
                   ? draw_uniform_clause(spec.n, spec.k, rng)
                   : draw_weighted_clause(weights, spec.k, rng);
    if (!seen.insert(c.lits).second) {
      if (++rejections > kMaxRejections)
        throw GenerationError("duplicate-clause rejection limit exceeded");
      continue;
    }
    clauses.push_back(std::move(c));
  }
  return CnfFormula(spec.n, std::move(clauses));
}

}  // namespace

CnfFormula gen_ksat(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng = Rng::keyed(spec.seed, 0, kStreamGenerator);
  constexpr int kMaxFilterAttempts = 10000;
  for (int attempt = 0; attempt < kMaxFilterAttempts; ++attempt) {
    CnfFormula f = generate(spec, rng);
    if (!spec.require_satisfiable || is_satisfiable_exhaustive(f)) return f;
  }
  throw GenerationError("no satisfiable instance found within attempt limit");
}

CnfFormula gen_uniform_ksat(const GeneratorSpec& spec) {
  if (spec.family != ClauseFamily::kUniform)
    throw GenerationError("spec family is not uniform");
  return gen_ksat(spec);
}

CnfFormula gen_scalefree_ksat(const GeneratorSpec& spec) {
  if (spec.family != ClauseFamily::kScaleFree)
    throw GenerationError("spec family is not scale-free");
  return gen_ksat(spec);
}

std::vector<int64_t> frequency_profile(const CnfFormula& f) {
  std::vector<int64_t> counts(f.num_vars(), 0);
  for (const Clause& c : f.clauses())
    for (const Literal& l : c.lits) ++counts[l.var];
  return counts;
}

bool is_satisfiable_exhaustive(const CnfFormula& f) {
  if (f.num_vars() > 24)
    throw GenerationError("exhaustive check is limited to n <= 24");
  if (f.num_clauses() == 0) return true;
  CnfProblem problem{f};
  Assignment a(f.num_vars(), 0);
  CnfState state(problem, a);
  if (state.energy() == 0) return true;
  // Gray-code walk flips one variable per step.
  uint64_t total = 1ull << f.num_vars();
  for (uint64_t i = 1; i < total; ++i) {
    int bit = __builtin_ctzll(i);
    state.flip(bit);
    if (state.energy() == 0) return true;
  }
  return false;
}

}  // namespace nmc
