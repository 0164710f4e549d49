#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmc/problem.hpp"
#include "nmc/rng.hpp"

namespace nmc {

enum class ClauseFamily { kUniform, kScaleFree };

struct GeneratorSpec {
  int n = 0;
  int m = 0;  // clause count; set via ratio() helper when working with alpha
  int k = 4;
  ClauseFamily family = ClauseFamily::kUniform;
  double b = 3.0;  // power-law exponent, scale-free only
  uint64_t seed = 0;
  // Optional rejection filter; exhaustive check, so limited to n <= 24.
  bool require_satisfiable = false;

  static int clauses_for_ratio(int n, double alpha);
  void validate() const;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Normalized selection weights of the power law (a probability vector).
std::vector<double> scalefree_weights(int n, double b);

CnfFormula gen_uniform_ksat(const GeneratorSpec& spec);
CnfFormula gen_scalefree_ksat(const GeneratorSpec& spec);
CnfFormula gen_ksat(const GeneratorSpec& spec);

// Per-variable occurrence counts; sums to k * M.
std::vector<int64_t> frequency_profile(const CnfFormula& f);

// Exhaustive satisfiability check (Gray-code walk), n <= 24.
bool is_satisfiable_exhaustive(const CnfFormula& f);

}  // namespace nmc
