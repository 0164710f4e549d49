#include "nmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "nmc/rng.hpp"

namespace nmc {

double pos_at(const std::vector<RunRecord>& records, uint64_t budget_mcs) {
  if (records.empty())
    throw std::invalid_argument("pos_at requires at least one record");
  int64_t hits = 0;
  for (const RunRecord& r : records)
    hits += r.first_success_mcs && *r.first_success_mcs <= budget_mcs;
  return double(hits) / double(records.size());
}

std::optional<double> tts99(double pos, double tau) {
  if (pos < 0.0 || pos > 1.0)
    throw std::invalid_argument("pos must lie in [0, 1]");
  if (pos == 0.0) return std::nullopt;
  if (pos > 0.99) return tau;  // at least one run is required
  return tau * std::log(1.0 - 0.99) / std::log(1.0 - pos);
}

double residual_energy_mean(const std::vector<RunRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("residual energy requires records");
  double s = 0.0;
  for (const RunRecord& r : records) s += r.min_energy;
  return s / double(records.size());
}

double percentile(std::vector<double> values, double x) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("percentile in [0,1]");
  std::sort(values.begin(), values.end());
  double h = x * double(values.size() - 1);
  size_t lo = size_t(h);
  if (lo + 1 >= values.size()) return values.back();
  double frac = h - double(lo);
  return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

double tau_with_overhead(uint64_t budget, const BootstrapConfig& cfg) {
  double tau = double(budget);
  if (cfg.jump_overhead_mcs > 0.0 && cfg.per_jump_mcs > 0) {
    uint64_t jumps = 0;
    if (budget > cfg.sa_phase_mcs)
      jumps = std::min<uint64_t>((budget - cfg.sa_phase_mcs) / cfg.per_jump_mcs,
                                 uint64_t(cfg.n_jumps));
    tau += cfg.jump_overhead_mcs * double(jumps);
  }
  return tau;
}

namespace {

double instance_statistic(const std::vector<RunRecord>& records,
                          const BootstrapConfig& cfg, Rng& rng) {
  switch (cfg.statistic) {
    case BootstrapStatistic::kResidualEnergyMean:
      return residual_energy_mean(records);
    case BootstrapStatistic::kTtsAtBudget:
    case BootstrapStatistic::kTtsMinOverBudgets: {
      if (cfg.budgets.empty())
        throw std::invalid_argument("TTS statistic requires budgets");
      int n_repl = int(records.size());
      double best = std::numeric_limits<double>::infinity();
      size_t n_budgets = cfg.statistic == BootstrapStatistic::kTtsAtBudget
                             ? 1
                             : cfg.budgets.size();
      for (size_t bi = 0; bi < n_budgets; ++bi) {
        uint64_t budget = cfg.budgets[bi];
        int n_success = 0;
        for (const RunRecord& r : records)
          n_success += r.first_success_mcs && *r.first_success_mcs <= budget;
        double pos =
            rng.beta(n_success + 0.5, (n_repl - n_success) + 0.5);
        double tau = tau_with_overhead(budget, cfg);
        double tts = pos > 0.99
                         ? tau
                         : tau * std::log(1.0 - 0.99) / std::log(1.0 - pos);
        best = std::min(best, tts);
      }
      return best;
    }
  }
  throw std::logic_error("unknown statistic");
}

}  // namespace

BootstrapResult bootstrap_percentile(
    const std::vector<std::vector<RunRecord>>& per_instance,
    const BootstrapConfig& cfg) {
  if (per_instance.empty())
    throw std::invalid_argument("bootstrap requires at least one instance");
  if (cfg.n_boot < 1) throw std::invalid_argument("n_boot must be positive");
  Rng rng = Rng::keyed(cfg.seed, 0, kStreamBootstrap);
  size_t n = per_instance.size();
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> stats(n);
  for (int round = 0; round < cfg.n_boot; ++round) {
    for (size_t i = 0; i < n; ++i) {
      size_t pick = size_t(rng.below(n));
      stats[i] = instance_statistic(per_instance[pick], cfg, rng);
    }
    double q = percentile(stats, cfg.percentile);
    sum += q;
    sum_sq += q * q;
  }
  BootstrapResult out;
  out.mean = sum / cfg.n_boot;
  double var = sum_sq / cfg.n_boot - out.mean * out.mean;
  out.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Maximum independent set
// ---------------------------------------------------------------------------

namespace {

// Bitset adjacency over <= 64 * kWords vertices, sized at runtime.
struct BitGraph {
  int n = 0;
  int words = 0;
  std::vector<uint64_t> adj;  // n rows

  explicit BitGraph(int n_) : n(n_), words((n_ + 63) / 64), adj(size_t(n_) * words, 0) {}

  void add_edge(int u, int v) {
    adj[size_t(u) * words + (v >> 6)] |= 1ull << (v & 63);
    adj[size_t(v) * words + (u >> 6)] |= 1ull << (u & 63);
  }
  const uint64_t* row(int u) const { return &adj[size_t(u) * words]; }
};

struct BitSet {
  std::vector<uint64_t> w;
  explicit BitSet(int words) : w(words, 0) {}
  void set(int i) { w[i >> 6] |= 1ull << (i & 63); }
  bool test(int i) const { return w[i >> 6] & (1ull << (i & 63)); }
  void clear(int i) { w[i >> 6] &= ~(1ull << (i & 63)); }
  int count() const {
    int c = 0;
    for (uint64_t x : w) c += __builtin_popcountll(x);
    return c;
  }
  bool empty() const {
    for (uint64_t x : w)
      if (x) return false;
    return true;
  }
};

struct MisSolver {
  const BitGraph& g;
  int64_t budget;
  int64_t nodes = 0;
  bool exhausted = false;
  int best = 0;

  MisSolver(const BitGraph& graph, int64_t node_budget)
      : g(graph), budget(node_budget) {}

  int degree_in(int u, const BitSet& p) const {
    int d = 0;
    const uint64_t* r = g.row(u);
    for (int w = 0; w < g.words; ++w) d += __builtin_popcountll(r[w] & p.w[w]);
    return d;
  }

  // Min-degree greedy with incrementally maintained degrees.
  int greedy(BitSet p) const {
    std::vector<int> deg(g.n, -1);
    int remaining = 0;
    for (int u = 0; u < g.n; ++u) {
      if (!p.test(u)) continue;
      deg[u] = degree_in(u, p);
      ++remaining;
    }
    int size = 0;
    std::vector<int> removed;
    while (remaining > 0) {
      int pick = -1;
      for (int u = 0; u < g.n; ++u) {
        if (!p.test(u)) continue;
        if (pick < 0 || deg[u] < deg[pick]) pick = u;
      }
      ++size;
      removed.clear();
      removed.push_back(pick);
      const uint64_t* r = g.row(pick);
      for (int w = 0; w < g.words; ++w) {
        uint64_t bits = r[w] & p.w[w];
        while (bits) {
          removed.push_back(w * 64 + __builtin_ctzll(bits));
          bits &= bits - 1;
        }
      }
      for (int u : removed) p.clear(u);
      remaining -= int(removed.size());
      for (int u : removed) {
        const uint64_t* ru = g.row(u);
        for (int w = 0; w < g.words; ++w) {
          uint64_t bits = ru[w] & p.w[w];
          while (bits) {
            --deg[w * 64 + __builtin_ctzll(bits)];
            bits &= bits - 1;
          }
        }
      }
    }
    return size;
  }

  void branch(BitSet p, int curr) {
    if (exhausted) return;
    // the exclude half of each split is a tail loop
    for (;;) {
      if (++nodes > budget) {
        exhausted = true;
        return;
      }
      int rem = p.count();
      if (rem == 0) {
        best = std::max(best, curr);
        return;
      }
      if (curr + rem <= best) return;
      int pick = -1, max_deg = -1;
      int edges2 = 0;  // twice the edge count
      bool reduced = false;
      for (int u = 0; u < g.n; ++u) {
        if (!p.test(u)) continue;
        int d = degree_in(u, p);
        edges2 += d;
        if (d <= 1) {
          // taking u is always optimal
          ++curr;
          p.clear(u);
          const uint64_t* r = g.row(u);
          for (int w = 0; w < g.words; ++w) p.w[w] &= ~r[w];
          reduced = true;
          break;
        }
        if (d > max_deg) {
          max_deg = d;
          pick = u;
        }
      }
      if (reduced) continue;
      // alpha(G') <= n' - ceil(m' / max_deg)
      int ub = rem - (edges2 / 2 + max_deg - 1) / max_deg;
      if (curr + ub <= best) return;
      // include pick
      BitSet inc = p;
      inc.clear(pick);
      const uint64_t* r = g.row(pick);
      for (int w = 0; w < g.words; ++w) inc.w[w] &= ~r[w];
      branch(std::move(inc), curr + 1);
      // exclude pick
      p.clear(pick);
      // tail-loop instead of recursing
    }
  }
};

}  // namespace

MisResult mis_exact(int n, const std::vector<std::pair<int, int>>& edges,
                    int64_t node_budget) {
  if (n == 0) return {0, true};
  BitGraph g(n);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (u != v) g.add_edge(u, v);
  }
  // connected components, solved independently
  std::vector<int> comp(n, -1);
  int n_comp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = n_comp;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      const uint64_t* r = g.row(u);
      for (int v = 0; v < n; ++v) {
        if (comp[v] < 0 && (r[v >> 6] & (1ull << (v & 63)))) {
          comp[v] = n_comp;
          stack.push_back(v);
        }
      }
    }
    ++n_comp;
  }
  MisResult out;
  MisSolver solver(g, node_budget);
  for (int c = 0; c < n_comp; ++c) {
    BitSet p(g.words);
    for (int u = 0; u < n; ++u)
      if (comp[u] == c) p.set(u);
    int lb = solver.greedy(p);
    solver.best = lb;
    solver.branch(p, 0);
    if (solver.exhausted) {
      out.exact = false;
      out.size += std::max(lb, solver.best);
    } else {
      out.size += solver.best;
    }
    solver.best = 0;
    solver.exhausted = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diversity
// ---------------------------------------------------------------------------

DiversityResult diversity(const std::vector<Assignment>& solutions,
                          double r_min, double r_max, double step,
                          int64_t node_budget) {
  if (!(r_min >= 0.0 && r_max > r_min && step > 0.0))
    throw std::invalid_argument("diversity requires 0 <= r_min < r_max, step > 0");
  DiversityResult out;
  // left-endpoint grid over [r_min, r_max)
  for (double r = r_min; r < r_max - 1e-12; r += step) out.r_grid.push_back(r);

  // dedupe at distance zero
  std::set<Assignment> unique(solutions.begin(), solutions.end());
  std::vector<Assignment> sols(unique.begin(), unique.end());
  for (const Assignment& s : sols)
    if (s.size() != sols.front().size())
      throw DimensionError("solutions have mixed lengths");
  out.solution_count = int(sols.size());
  if (sols.empty()) {
    out.d_of_r.assign(out.r_grid.size(), 0);
    out.exact.assign(out.r_grid.size(), 1);
    out.integral = 0.0;
    return out;
  }
  int n = int(sols.size());
  int nv = int(sols.front().size());
  // pairwise Hamming distances (in variables)
  std::vector<int> dist(size_t(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      int d = 0;
      for (int v = 0; v < nv; ++v) d += sols[i][v] != sols[j][v];
      dist[size_t(i) * n + j] = d;
      dist[size_t(j) * n + i] = d;
    }
  }
  double sum = 0.0;
  for (double r : out.r_grid) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (double(dist[size_t(i) * n + j]) <= r * double(nv) + 1e-9)
          edges.push_back({i, j});
    MisResult mis = mis_exact(n, edges, node_budget);
    out.d_of_r.push_back(mis.size);
    out.exact.push_back(mis.exact ? 1 : 0);
    out.all_exact = out.all_exact && mis.exact;
    sum += double(mis.size) * step;
  }
  out.integral = sum / (r_max - r_min);
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory diagnostics
// ---------------------------------------------------------------------------

std::vector<TraceRow> trajectory_diagnostics(
    const std::vector<TracePoint>& trace, uint64_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  std::vector<TraceRow> rows;
  if (trace.empty()) return rows;

  double best_energy = 0.0;
  Assignment best_state;
  bool have_best = false;

  size_t i = 0;
  while (i < trace.size()) {
    uint64_t w = trace[i].mcs / window;
    size_t min_idx = i;
    while (i < trace.size() && trace[i].mcs / window == w) {
      if (trace[i].energy < trace[min_idx].energy) min_idx = i;
      ++i;
    }
    const TracePoint& m = trace[min_idx];
    if (!m.state)
      throw std::invalid_argument("window minimum lacks a state snapshot");
    if (!have_best || m.energy < best_energy) {
      best_energy = m.energy;
      best_state = *m.state;
      have_best = true;
    }
    TraceRow row;
    row.window = int(w);
    row.mcs = m.mcs;
    row.basin_energy = m.energy;
    int d = 0;
    for (size_t v = 0; v < best_state.size(); ++v)
      d += (*m.state)[v] != best_state[v];
    row.dist_to_best =
        best_state.empty() ? 0.0 : double(d) / double(best_state.size());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nmc
