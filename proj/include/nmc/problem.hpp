#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nmc {

using VarIndex = int32_t;

// Binary assignment; the spin view of bit x is sigma = 2x - 1.
using Assignment = std::vector<uint8_t>;

inline int spin_of(uint8_t bit) { return 2 * int(bit) - 1; }

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        line_number(line) {}
  int line_number;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// CNF
// ---------------------------------------------------------------------------

struct Literal {
  VarIndex var = 0;
  bool negated = false;

  bool operator==(const Literal&) const = default;
  bool operator<(const Literal& o) const {
    return var != o.var ? var < o.var : negated < o.negated;
  }
};

// A clause holds literals over distinct variables, kept sorted by variable so
// that clause identity is the unordered literal set.
struct Clause {
  std::vector<Literal> lits;

  int width() const { return int(lits.size()); }
  bool operator==(const Clause&) const = default;
};

Clause make_clause(std::vector<Literal> lits);  // sorts, validates distinctness

class CnfFormula {
 public:
  CnfFormula() = default;
  CnfFormula(int num_vars, std::vector<Clause> clauses);

  int num_vars() const { return num_vars_; }
  int num_clauses() const { return int(clauses_.size()); }
  const std::vector<Clause>& clauses() const { return clauses_; }

  bool operator==(const CnfFormula&) const = default;

 private:
  int num_vars_ = 0;
  std::vector<Clause> clauses_;
};

// ---------------------------------------------------------------------------
// Polynomial cost functions (PUBO / p-spin Ising)
// ---------------------------------------------------------------------------

enum class VarDomain { kBinary, kSpin };

struct PolyTerm {
  double coeff = 0.0;
  std::vector<VarIndex> vars;  // sorted, distinct, non-empty

  bool operator==(const PolyTerm&) const = default;
};

// Canonical multilinear polynomial: duplicate terms merged at construction,
// zero coefficients dropped, variable subsets sorted.
class PolyCost {
 public:
  PolyCost() = default;
  PolyCost(VarDomain domain, int num_vars, std::vector<PolyTerm> terms,
           double constant = 0.0);

  VarDomain domain() const { return domain_; }
  int num_vars() const { return num_vars_; }
  const std::vector<PolyTerm>& terms() const { return terms_; }
  double constant() const { return constant_; }

  bool operator==(const PolyCost&) const = default;

 private:
  VarDomain domain_ = VarDomain::kBinary;
  int num_vars_ = 0;
  std::vector<PolyTerm> terms_;
  double constant_ = 0.0;
};

// ---------------------------------------------------------------------------
// Factor graph (CSR adjacency shared by sweep kernels and the policy)
// ---------------------------------------------------------------------------

struct FactorGraph {
  int num_vars = 0;
  // factor -> member variables
  std::vector<int32_t> factor_offsets;  // size num_factors + 1
  std::vector<VarIndex> factor_vars;
  // variable -> incident factors
  std::vector<int32_t> var_offsets;  // size num_vars + 1
  std::vector<int32_t> var_factors;

  int num_factors() const { return int(factor_offsets.size()) - 1; }
  int factor_size(int a) const {
    return factor_offsets[a + 1] - factor_offsets[a];
  }
  int degree(VarIndex i) const { return var_offsets[i + 1] - var_offsets[i]; }
};

FactorGraph build_factor_graph(const CnfFormula& f);
FactorGraph build_factor_graph(const PolyCost& p);

// ---------------------------------------------------------------------------
// Energy evaluation
// ---------------------------------------------------------------------------

// Number of violated clauses (exact integer arithmetic).
int64_t energy(const CnfFormula& f, const Assignment& a);

double energy(const PolyCost& p, const Assignment& a);

// Expands each clause into the product of (1 - x) / x literal factors so that
// the polynomial value equals the unsat-clause count on every assignment.
PolyCost cnf_to_pubo(const CnfFormula& f);

// Symbolic substitution x = (1 + sigma) / 2 (and back) with re-expansion.
PolyCost to_spin(const PolyCost& p);
PolyCost to_binary(const PolyCost& p);

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

CnfFormula parse_dimacs(std::string_view text);
std::string write_dimacs(const CnfFormula& f);

// Line-oriented polynomial format: header `pubo <binary|spin> N`, then one
// term per line as `coeff i1 i2 ... ip` with 1-based indices; a bare `coeff`
// line is the constant.
PolyCost parse_pubo(std::string_view text);
std::string write_pubo(const PolyCost& p);

// ---------------------------------------------------------------------------
// Compiled problems with incremental flip bookkeeping
// ---------------------------------------------------------------------------

class CnfProblem;

// Incremental state for a compiled CNF problem: per-clause true-literal
// counts, cached energy and cached flip deltas, all exact integers.
class CnfState {
 public:
  using Energy = int64_t;

  CnfState(const CnfProblem& p, Assignment a);

  const Assignment& assignment() const { return x_; }
  Energy energy() const { return energy_; }
  Energy delta(VarIndex i) const { return delta_[i]; }
  double local_field(VarIndex i) const { return 0.5 * double(delta_[i]); }
  const std::vector<int64_t>& deltas() const { return delta_; }

  void flip(VarIndex i);
  void set_assignment(const Assignment& a);  // full rebuild

  // Debug helper: recomputes everything from scratch and compares.
  bool consistent() const;

 private:
  void rebuild();

  const CnfProblem* p_;
  Assignment x_;
  std::vector<int32_t> true_count_;
  std::vector<int64_t> delta_;
  int64_t energy_ = 0;
};

class CnfProblem {
 public:
  using Energy = int64_t;
  using State = CnfState;

  explicit CnfProblem(CnfFormula f);

  int num_vars() const { return formula_.num_vars(); }
  int num_clauses() const { return formula_.num_clauses(); }
  const CnfFormula& formula() const { return formula_; }
  const FactorGraph& graph() const { return graph_; }
  VarDomain domain() const { return VarDomain::kBinary; }
  // Largest possible |delta| of a single flip (bounds acceptance tables).
  int max_abs_delta() const { return max_degree_; }

 private:
  friend class CnfState;
  CnfFormula formula_;
  FactorGraph graph_;
  // clause literals, aligned with graph_.factor_vars
  std::vector<uint8_t> lit_negated_;
  // per variable: incident (clause, literal slot) pairs, CSR via graph_
  std::vector<int32_t> occ_slot_;  // slot of the variable inside the clause
  int max_degree_ = 0;
};

class PuboProblem;

// Incremental state for a compiled polynomial. Binary domain tracks the
// number of zero factors per term; spin domain tracks the product sign.
class PuboState {
 public:
  using Energy = double;

  PuboState(const PuboProblem& p, Assignment a);

  const Assignment& assignment() const { return x_; }
  Energy energy() const { return energy_; }
  Energy delta(VarIndex i) const { return delta_[i]; }
  double local_field(VarIndex i) const { return 0.5 * delta_[i]; }
  const std::vector<double>& deltas() const { return delta_; }

  void flip(VarIndex i);
  void set_assignment(const Assignment& a);
  bool consistent() const;

 private:
  void rebuild();
  double term_value(int t) const;
  // Contribution of term t to delta(i); `count` is the zero count (binary).
  double flip_gain(int t, VarIndex i) const;

  const PuboProblem* p_;
  Assignment x_;
  std::vector<int32_t> count_;  // binary: #zeros in term; spin: #minus spins
  std::vector<double> delta_;
  double energy_ = 0.0;
};

class PuboProblem {
 public:
  using Energy = double;
  using State = PuboState;

  explicit PuboProblem(PolyCost p);

  int num_vars() const { return poly_.num_vars(); }
  int num_terms() const { return int(poly_.terms().size()); }
  const PolyCost& poly() const { return poly_; }
  const FactorGraph& graph() const { return graph_; }
  VarDomain domain() const { return poly_.domain(); }

 private:
  friend class PuboState;
  PolyCost poly_;
  FactorGraph graph_;
  std::vector<double> coeff_;  // per term
};

}  // namespace nmc
