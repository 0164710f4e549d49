#include "nmc/problem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace nmc {

Clause make_clause(std::vector<Literal> lits) {
  if (lits.empty()) throw std::invalid_argument("clause must have width >= 1");
  std::sort(lits.begin(), lits.end());
  for (size_t i = 1; i < lits.size(); ++i) {
    if (lits[i].var == lits[i - 1].var)
      throw std::invalid_argument("clause repeats variable " +
                                  std::to_string(lits[i].var + 1));
  }
  return Clause{std::move(lits)};
}

CnfFormula::CnfFormula(int num_vars, std::vector<Clause> clauses)
    : num_vars_(num_vars), clauses_(std::move(clauses)) {
  if (num_vars < 0) throw std::invalid_argument("negative variable count");
  std::set<std::vector<Literal>> seen;
  for (const Clause& c : clauses_) {
    if (c.lits.empty()) throw std::invalid_argument("empty clause");
    for (const Literal& l : c.lits) {
      if (l.var < 0 || l.var >= num_vars_)
        throw std::invalid_argument("literal index out of range: " +
                                    std::to_string(l.var + 1));
    }
    if (!seen.insert(c.lits).second)
      throw std::invalid_argument("duplicate clause");
  }
}

PolyCost::PolyCost(VarDomain domain, int num_vars, std::vector<PolyTerm> terms,
                   double constant)
    : domain_(domain), num_vars_(num_vars), constant_(constant) {
  if (num_vars < 0) throw std::invalid_argument("negative variable count");
  std::map<std::vector<VarIndex>, double> merged;
  for (PolyTerm& t : terms) {
    std::sort(t.vars.begin(), t.vars.end());
    for (size_t i = 0; i < t.vars.size(); ++i) {
      if (t.vars[i] < 0 || t.vars[i] >= num_vars)
        throw std::invalid_argument("term variable out of range");
      if (i > 0 && t.vars[i] == t.vars[i - 1])
        throw std::invalid_argument("term repeats a variable");
    }
    if (t.vars.empty())
      constant_ += t.coeff;
    else
      merged[t.vars] += t.coeff;
  }
  for (auto& [vars, coeff] : merged) {
    if (coeff != 0.0) terms_.push_back(PolyTerm{coeff, vars});
  }
}

// ---------------------------------------------------------------------------
// Factor graph
// ---------------------------------------------------------------------------

namespace {

FactorGraph build_graph(int num_vars,
                        const std::vector<std::vector<VarIndex>>& factors) {
  FactorGraph g;
  g.num_vars = num_vars;
  g.factor_offsets.reserve(factors.size() + 1);
  g.factor_offsets.push_back(0);
  for (const auto& f : factors) {
    g.factor_vars.insert(g.factor_vars.end(), f.begin(), f.end());
    g.factor_offsets.push_back(int32_t(g.factor_vars.size()));
  }
  std::vector<int32_t> deg(num_vars, 0);
  for (VarIndex v : g.factor_vars) ++deg[v];
  g.var_offsets.assign(num_vars + 1, 0);
  for (int i = 0; i < num_vars; ++i) g.var_offsets[i + 1] = g.var_offsets[i] + deg[i];
  g.var_factors.resize(g.factor_vars.size());
  std::vector<int32_t> cur(g.var_offsets.begin(), g.var_offsets.end() - 1);
  for (int a = 0; a < int(factors.size()); ++a) {
    for (int32_t k = g.factor_offsets[a]; k < g.factor_offsets[a + 1]; ++k)
      g.var_factors[cur[g.factor_vars[k]]++] = a;
  }
  return g;
}

}  // namespace

FactorGraph build_factor_graph(const CnfFormula& f) {
  std::vector<std::vector<VarIndex>> factors;
  factors.reserve(f.num_clauses());
  for (const Clause& c : f.clauses()) {
    std::vector<VarIndex> vars;
    vars.reserve(c.lits.size());
    for (const Literal& l : c.lits) vars.push_back(l.var);
    factors.push_back(std::move(vars));
  }
  return build_graph(f.num_vars(), factors);
}

FactorGraph build_factor_graph(const PolyCost& p) {
  std::vector<std::vector<VarIndex>> factors;
  factors.reserve(p.terms().size());
  for (const PolyTerm& t : p.terms()) factors.push_back(t.vars);
  return build_graph(p.num_vars(), factors);
}

// ---------------------------------------------------------------------------
// Energy
// ---------------------------------------------------------------------------

int64_t energy(const CnfFormula& f, const Assignment& a) {
  if (int(a.size()) != f.num_vars())
    throw DimensionError("assignment length does not match formula");
  int64_t unsat = 0;
  for (const Clause& c : f.clauses()) {
    bool sat = false;
    for (const Literal& l : c.lits) {
      if (bool(a[l.var]) != l.negated) {
        sat = true;
        break;
      }
    }
    if (!sat) ++unsat;
  }
  return unsat;
}

double energy(const PolyCost& p, const Assignment& a) {
  if (int(a.size()) != p.num_vars())
    throw DimensionError("assignment length does not match polynomial");
  double e = p.constant();
  for (const PolyTerm& t : p.terms()) {
    double v = t.coeff;
    if (p.domain() == VarDomain::kBinary) {
      for (VarIndex i : t.vars) {
        if (!a[i]) {
          v = 0.0;
          break;
        }
      }
    } else {
      for (VarIndex i : t.vars) v *= spin_of(a[i]);
    }
    e += v;
  }
  return e;
}

PolyCost cnf_to_pubo(const CnfFormula& f) {
  std::map<std::vector<VarIndex>, double> acc;
  double constant = 0.0;
  for (const Clause& c : f.clauses()) {
    // product over literals: positive x -> (1 - x), negated x -> x
    std::vector<std::pair<std::vector<VarIndex>, double>> expansion;
    expansion.push_back({{}, 1.0});
    for (const Literal& l : c.lits) {
      if (l.negated) {
        for (auto& [vars, coeff] : expansion) vars.push_back(l.var);
      } else {
        size_t n = expansion.size();
        for (size_t i = 0; i < n; ++i) {
          auto with = expansion[i];
          with.first.push_back(l.var);
          with.second = -with.second;
          expansion.push_back(std::move(with));
        }
      }
    }
    for (auto& [vars, coeff] : expansion) {
      if (vars.empty())
        constant += coeff;
      else {
        std::sort(vars.begin(), vars.end());
        acc[vars] += coeff;
      }
    }
  }
  std::vector<PolyTerm> terms;
  terms.reserve(acc.size());
  for (auto& [vars, coeff] : acc) terms.push_back(PolyTerm{coeff, vars});
  return PolyCost(VarDomain::kBinary, f.num_vars(), std::move(terms), constant);
}

namespace {

// Expands prod_{i in vars} (scale * y_i + shift) into subset terms of y.
void expand_affine_product(const PolyTerm& t, double scale, double shift,
                           std::map<std::vector<VarIndex>, double>& acc,
                           double& constant) {
  int p = int(t.vars.size());
  for (uint32_t mask = 0; mask < (1u << p); ++mask) {
    std::vector<VarIndex> sub;
    int picked = 0;
    for (int j = 0; j < p; ++j) {
      if (mask & (1u << j)) {
        sub.push_back(t.vars[j]);
        ++picked;
      }
    }
    double coeff =
        t.coeff * std::pow(scale, picked) * std::pow(shift, p - picked);
    if (sub.empty())
      constant += coeff;
    else
      acc[sub] += coeff;
  }
}

PolyCost substitute(const PolyCost& p, VarDomain from, VarDomain to,
                    double scale, double shift) {
  if (p.domain() != from)
    throw std::invalid_argument("polynomial is not in the expected domain");
  std::map<std::vector<VarIndex>, double> acc;
  double constant = p.constant();
  for (const PolyTerm& t : p.terms())
    expand_affine_product(t, scale, shift, acc, constant);
  std::vector<PolyTerm> terms;
  for (auto& [vars, coeff] : acc) terms.push_back(PolyTerm{coeff, vars});
  return PolyCost(to, p.num_vars(), std::move(terms), constant);
}

}  // namespace

PolyCost to_spin(const PolyCost& p) {
  // x = (1 + sigma) / 2
  return substitute(p, VarDomain::kBinary, VarDomain::kSpin, 0.5, 0.5);
}

PolyCost to_binary(const PolyCost& p) {
  // sigma = 2x - 1
  return substitute(p, VarDomain::kSpin, VarDomain::kBinary, 2.0, -1.0);
}

// ---------------------------------------------------------------------------
// DIMACS
// ---------------------------------------------------------------------------

CnfFormula parse_dimacs(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  int num_vars = -1;
  long declared_clauses = -1;
  std::vector<Clause> clauses;
  std::vector<Literal> current;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "c") continue;
    if (tok == "p") {
      if (num_vars >= 0) throw ParseError("duplicate problem line", line_no);
      std::string fmt;
      if (!(ls >> fmt >> num_vars >> declared_clauses) || fmt != "cnf" ||
          num_vars < 0 || declared_clauses < 0)
        throw ParseError("malformed header, expected `p cnf N M`", line_no);
      continue;
    }
    if (num_vars < 0)
      throw ParseError("clause data before `p cnf` header", line_no);
    ls.clear();
    ls.str(line);
    long lit;
    while (ls >> lit) {
      if (lit == 0) {
        if (current.empty()) throw ParseError("empty clause", line_no);
        try {
          clauses.push_back(make_clause(current));
        } catch (const std::invalid_argument& e) {
          throw ParseError(e.what(), line_no);
        }
        current.clear();
      } else {
        long v = lit > 0 ? lit : -lit;
        if (v > num_vars)
          throw ParseError("literal index " + std::to_string(v) +
                               " exceeds declared variable count",
                           line_no);
        current.push_back(Literal{VarIndex(v - 1), lit < 0});
      }
    }
    if (!ls.eof()) throw ParseError("unexpected token in clause data", line_no);
  }
  if (num_vars < 0) throw ParseError("missing `p cnf` header", line_no);
  if (!current.empty()) throw ParseError("unterminated clause at end of input", line_no);
  if (long(clauses.size()) != declared_clauses)
    throw ParseError("clause count " + std::to_string(clauses.size()) +
                         " does not match declared " +
                         std::to_string(declared_clauses),
                     line_no);
  try {
    return CnfFormula(num_vars, std::move(clauses));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line_no);
  }
}

std::string write_dimacs(const CnfFormula& f) {
  std::string out = "p cnf " + std::to_string(f.num_vars()) + " " +
                    std::to_string(f.num_clauses()) + "\n";
  for (const Clause& c : f.clauses()) {
    for (const Literal& l : c.lits) {
      out += std::to_string(l.negated ? -(l.var + 1) : (l.var + 1));
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Polynomial text format
// ---------------------------------------------------------------------------

PolyCost parse_pubo(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool have_header = false;
  VarDomain domain = VarDomain::kBinary;
  int num_vars = 0;
  std::vector<PolyTerm> terms;
  double constant = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "c") continue;
    if (!have_header) {
      std::string dom;
      if (tok != "pubo" || !(ls >> dom >> num_vars) ||
          (dom != "binary" && dom != "spin") || num_vars < 0)
        throw ParseError("malformed header, expected `pubo <binary|spin> N`",
                         line_no);
      domain = dom == "binary" ? VarDomain::kBinary : VarDomain::kSpin;
      have_header = true;
      continue;
    }
    PolyTerm t;
    try {
      t.coeff = std::stod(tok);
    } catch (const std::exception&) {
      throw ParseError("expected a coefficient, got `" + tok + "`", line_no);
    }
    long idx;
    while (ls >> idx) {
      if (idx < 1 || idx > num_vars)
        throw ParseError("variable index out of range", line_no);
      t.vars.push_back(VarIndex(idx - 1));
    }
    if (!ls.eof()) throw ParseError("unexpected token in term", line_no);
    if (t.vars.empty())
      constant += t.coeff;
    else
      terms.push_back(std::move(t));
  }
  if (!have_header) throw ParseError("missing `pubo` header", line_no);
  try {
    return PolyCost(domain, num_vars, std::move(terms), constant);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line_no);
  }
}

std::string write_pubo(const PolyCost& p) {
  std::ostringstream out;
  out.precision(17);
  out << "pubo " << (p.domain() == VarDomain::kBinary ? "binary" : "spin")
      << " " << p.num_vars() << "\n";
  if (p.constant() != 0.0) out << p.constant() << "\n";
  for (const PolyTerm& t : p.terms()) {
    out << t.coeff;
    for (VarIndex v : t.vars) out << " " << (v + 1);
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Compiled CNF
// ---------------------------------------------------------------------------

CnfProblem::CnfProblem(CnfFormula f) : formula_(std::move(f)) {
  graph_ = build_factor_graph(formula_);
  lit_negated_.resize(graph_.factor_vars.size());
  for (int a = 0; a < formula_.num_clauses(); ++a) {
    const Clause& c = formula_.clauses()[a];
    for (int s = 0; s < c.width(); ++s)
      lit_negated_[graph_.factor_offsets[a] + s] = c.lits[s].negated;
  }
  // slot of each variable inside each incident clause
  occ_slot_.resize(graph_.var_factors.size());
  std::vector<int32_t> cur(graph_.var_offsets.begin(),
                           graph_.var_offsets.end() - 1);
  for (int a = 0; a < graph_.num_factors(); ++a) {
    for (int32_t k = graph_.factor_offsets[a]; k < graph_.factor_offsets[a + 1];
         ++k) {
      VarIndex v = graph_.factor_vars[k];
      occ_slot_[cur[v]++] = k - graph_.factor_offsets[a];
    }
  }
  for (int i = 0; i < num_vars(); ++i)
    max_degree_ = std::max(max_degree_, graph_.degree(i));
}

CnfState::CnfState(const CnfProblem& p, Assignment a) : p_(&p), x_(std::move(a)) {
  if (int(x_.size()) != p.num_vars())
    throw DimensionError("assignment length does not match problem");
  rebuild();
}

void CnfState::rebuild() {
  const FactorGraph& g = p_->graph_;
  int m = g.num_factors();
  true_count_.assign(m, 0);
  delta_.assign(p_->num_vars(), 0);
  energy_ = 0;
  for (int a = 0; a < m; ++a) {
    int tc = 0;
    for (int32_t k = g.factor_offsets[a]; k < g.factor_offsets[a + 1]; ++k) {
      if (bool(x_[g.factor_vars[k]]) != bool(p_->lit_negated_[k])) ++tc;
    }
    true_count_[a] = tc;
    if (tc == 0) ++energy_;
    for (int32_t k = g.factor_offsets[a]; k < g.factor_offsets[a + 1]; ++k) {
      bool lit_true = bool(x_[g.factor_vars[k]]) != bool(p_->lit_negated_[k]);
      if (lit_true) {
        if (tc == 1) ++delta_[g.factor_vars[k]];
      } else {
        if (tc == 0) --delta_[g.factor_vars[k]];
      }
    }
  }
}

void CnfState::flip(VarIndex i) {
  // Only clauses whose true-literal count crosses 0, 1 or 2 change member
  // deltas; anything deeper in the satisfied region is a counter update.
  const FactorGraph& g = p_->graph_;
  for (int32_t o = g.var_offsets[i]; o < g.var_offsets[i + 1]; ++o) {
    int a = g.var_factors[o];
    int32_t base = g.factor_offsets[a];
    int32_t end = g.factor_offsets[a + 1];
    bool was_true = bool(x_[i]) != bool(p_->lit_negated_[base + p_->occ_slot_[o]]);
    int tc_old = true_count_[a];
    if (was_true) {
      int tc_new = tc_old - 1;
      if (tc_new == 0) {
        ++energy_;
        delta_[i] -= 2;  // +1 (sole support) -> -1 (would satisfy)
        for (int32_t k = base; k < end; ++k) {
          VarIndex v = g.factor_vars[k];
          if (v != i) --delta_[v];
        }
      } else if (tc_new == 1) {
        for (int32_t k = base; k < end; ++k) {
          VarIndex v = g.factor_vars[k];
          if (v != i && (bool(x_[v]) != bool(p_->lit_negated_[k]))) {
            ++delta_[v];  // the remaining support becomes critical
            break;
          }
        }
      }
      true_count_[a] = tc_new;
    } else {
      int tc_new = tc_old + 1;
      if (tc_old == 0) {
        --energy_;
        delta_[i] += 2;  // -1 (would satisfy) -> +1 (sole support)
        for (int32_t k = base; k < end; ++k) {
          VarIndex v = g.factor_vars[k];
          if (v != i) ++delta_[v];
        }
      } else if (tc_old == 1) {
        for (int32_t k = base; k < end; ++k) {
          VarIndex v = g.factor_vars[k];
          if (v != i && (bool(x_[v]) != bool(p_->lit_negated_[k]))) {
            --delta_[v];  // previous sole support is no longer critical
            break;
          }
        }
      }
      true_count_[a] = tc_new;
    }
  }
  x_[i] = !x_[i];
}

void CnfState::set_assignment(const Assignment& a) {
  if (a.size() != x_.size())
    throw DimensionError("assignment length does not match problem");
  x_ = a;
  rebuild();
}

bool CnfState::consistent() const {
  CnfState fresh(*p_, x_);
  return fresh.energy_ == energy_ && fresh.true_count_ == true_count_ &&
         fresh.delta_ == delta_;
}

// ---------------------------------------------------------------------------
// Compiled polynomial
// ---------------------------------------------------------------------------

PuboProblem::PuboProblem(PolyCost p) : poly_(std::move(p)) {
  graph_ = build_factor_graph(poly_);
  coeff_.reserve(poly_.terms().size());
  for (const PolyTerm& t : poly_.terms()) coeff_.push_back(t.coeff);
}

PuboState::PuboState(const PuboProblem& p, Assignment a)
    : p_(&p), x_(std::move(a)) {
  if (int(x_.size()) != p.num_vars())
    throw DimensionError("assignment length does not match problem");
  rebuild();
}

double PuboState::term_value(int t) const {
  if (p_->domain() == VarDomain::kBinary)
    return count_[t] == 0 ? p_->coeff_[t] : 0.0;
  return (count_[t] & 1) ? -p_->coeff_[t] : p_->coeff_[t];
}

double PuboState::flip_gain(int t, VarIndex i) const {
  if (p_->domain() == VarDomain::kSpin) return -2.0 * term_value(t);
  if (x_[i]) return count_[t] == 0 ? -p_->coeff_[t] : 0.0;
  return count_[t] == 1 ? p_->coeff_[t] : 0.0;
}

void PuboState::rebuild() {
  const FactorGraph& g = p_->graph_;
  int m = g.num_factors();
  count_.assign(m, 0);
  delta_.assign(p_->num_vars(), 0.0);
  energy_ = p_->poly_.constant();
  for (int t = 0; t < m; ++t) {
    int c = 0;
    for (int32_t k = g.factor_offsets[t]; k < g.factor_offsets[t + 1]; ++k)
      if (!x_[g.factor_vars[k]]) ++c;
    count_[t] = c;
    energy_ += term_value(t);
  }
  for (int i = 0; i < p_->num_vars(); ++i) {
    for (int32_t o = g.var_offsets[i]; o < g.var_offsets[i + 1]; ++o)
      delta_[i] += flip_gain(g.var_factors[o], i);
  }
}

void PuboState::flip(VarIndex i) {
  const FactorGraph& g = p_->graph_;
  for (int32_t o = g.var_offsets[i]; o < g.var_offsets[i + 1]; ++o) {
    int t = g.var_factors[o];
    double v_old = term_value(t);
    // remove old contributions of this term from member deltas
    for (int32_t k = g.factor_offsets[t]; k < g.factor_offsets[t + 1]; ++k)
      delta_[g.factor_vars[k]] -= flip_gain(t, g.factor_vars[k]);
    count_[t] += x_[i] ? 1 : -1;  // zeros (binary) or minus spins (spin)
    x_[i] = !x_[i];
    double v_new = term_value(t);
    for (int32_t k = g.factor_offsets[t]; k < g.factor_offsets[t + 1]; ++k)
      delta_[g.factor_vars[k]] += flip_gain(t, g.factor_vars[k]);
    x_[i] = !x_[i];
    energy_ += v_new - v_old;
  }
  x_[i] = !x_[i];
}

void PuboState::set_assignment(const Assignment& a) {
  if (a.size() != x_.size())
    throw DimensionError("assignment length does not match problem");
  x_ = a;
  rebuild();
}

bool PuboState::consistent() const {
  PuboState fresh(*p_, x_);
  if (fresh.count_ != count_) return false;
  if (std::abs(fresh.energy_ - energy_) > 1e-9) return false;
  for (size_t i = 0; i < delta_.size(); ++i)
    if (std::abs(fresh.delta_[i] - delta_[i]) > 1e-9) return false;
  return true;
}

}  // namespace nmc
