#include "nmc/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace nmc {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y (+)= M x
inline void matvec(const Mat& m, const double* x, double* y, bool accumulate) {
  for (int r = 0; r < m.rows; ++r) {
    double s = accumulate ? y[r] : 0.0;
    const double* row = &m.a[size_t(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

// y (+)= M^T x
inline void matvec_t(const Mat& m, const double* x, double* y,
                     bool accumulate) {
  if (!accumulate)
    for (int c = 0; c < m.cols; ++c) y[c] = 0.0;
  for (int r = 0; r < m.rows; ++r) {
    const double* row = &m.a[size_t(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) y[c] += row[c] * x[r];
  }
}

// G += u v^T
inline void outer_acc(Mat& g, const double* u, const double* v) {
  for (int r = 0; r < g.rows; ++r) {
    double ur = u[r];
    if (ur == 0.0) continue;
    double* row = &g.a[size_t(r) * g.cols];
    for (int c = 0; c < g.cols; ++c) row[c] += ur * v[c];
  }
}

inline void vec_acc(Mat& g, const double* u) {
  for (int r = 0; r < g.rows; ++r) g.a[r] += u[r];
}

struct GruWeights {
  const Mat *wz, *wr, *wh, *uz, *ur, *uh, *bz, *br, *bh;
};
struct GruGrads {
  Mat *wz, *wr, *wh, *uz, *ur, *uh, *bz, *br, *bh;
};

// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
// hcand = tanh(Wh x + Uh (r . h) + bh), h' = (1 - z) . h + z . hcand
template <int H>
void gru_forward(const GruWeights& w, const double* x, const double* h,
                 double* z, double* r, double* hcand, double* h_new) {
  double rh[H];
  matvec(*w.wz, x, z, false);
  matvec(*w.uz, h, z, true);
  matvec(*w.wr, x, r, false);
  matvec(*w.ur, h, r, true);
  for (int j = 0; j < H; ++j) {
    z[j] = sigmoid(z[j] + w.bz->a[j]);
    r[j] = sigmoid(r[j] + w.br->a[j]);
    rh[j] = r[j] * h[j];
  }
  matvec(*w.wh, x, hcand, false);
  matvec(*w.uh, rh, hcand, true);
  for (int j = 0; j < H; ++j) {
    hcand[j] = std::tanh(hcand[j] + w.bh->a[j]);
    h_new[j] = (1.0 - z[j]) * h[j] + z[j] * hcand[j];
  }
}

// Backward of the step above. dh_new is the incoming gradient; dh_in receives
// the gradient on the entering hidden state; dx (optional) on the input.
template <int H>
void gru_backward(const GruWeights& w, const GruGrads& g, const double* x,
                  const double* h, const double* z, const double* r,
                  const double* hcand, const double* dh_new, double* dh_in,
                  double* dx) {
  double dz[H], dhc[H], dah[H], dar[H], daz[H], rh[H], dprod[H], dr[H];
  for (int j = 0; j < H; ++j) {
    dz[j] = dh_new[j] * (hcand[j] - h[j]);
    dhc[j] = dh_new[j] * z[j];
    dh_in[j] = dh_new[j] * (1.0 - z[j]);
    dah[j] = dhc[j] * (1.0 - hcand[j] * hcand[j]);
    rh[j] = r[j] * h[j];
  }
  outer_acc(*g.wh, dah, x);
  vec_acc(*g.bh, dah);
  outer_acc(*g.uh, dah, rh);
  matvec_t(*w.uh, dah, dprod, false);
  for (int j = 0; j < H; ++j) {
    dr[j] = dprod[j] * h[j];
    dh_in[j] += dprod[j] * r[j];
    dar[j] = dr[j] * r[j] * (1.0 - r[j]);
    daz[j] = dz[j] * z[j] * (1.0 - z[j]);
  }
  outer_acc(*g.wr, dar, x);
  vec_acc(*g.br, dar);
  outer_acc(*g.ur, dar, h);
  outer_acc(*g.wz, daz, x);
  vec_acc(*g.bz, daz);
  outer_acc(*g.uz, daz, h);
  double tmp[H];
  matvec_t(*w.ur, dar, tmp, false);
  for (int j = 0; j < H; ++j) dh_in[j] += tmp[j];
  matvec_t(*w.uz, daz, tmp, false);
  for (int j = 0; j < H; ++j) dh_in[j] += tmp[j];
  if (dx) {
    matvec_t(*w.wz, daz, dx, true);
    matvec_t(*w.wr, dar, dx, true);
    matvec_t(*w.wh, dah, dx, true);
  }
}

}  // namespace

size_t PolicyParams::parameter_count() const {
  size_t n = 0;
  for_each_block([&](const char*, const Mat& m) { n += m.size(); });
  return n;
}

void PolicyParams::set_zero() { fill(0.0); }

void PolicyParams::fill(double v) {
  for_each_block([&](const char*, Mat& m) {
    std::fill(m.a.begin(), m.a.end(), v);
  });
}

bool PolicyParams::all_finite() const {
  bool ok = true;
  for_each_block([&](const char*, const Mat& m) {
    for (double x : m.a)
      if (!std::isfinite(x)) ok = false;
  });
  return ok;
}

double PolicyParams::dot(const PolicyParams& o) const {
  double s = 0.0;
  const Mat* other[kBlockCount];
  int idx = 0;
  o.for_each_block([&](const char*, const Mat& m) { other[idx++] = &m; });
  idx = 0;
  for_each_block([&](const char*, const Mat& m) {
    const Mat& om = *other[idx++];
    for (size_t j = 0; j < m.a.size(); ++j) s += m.a[j] * om.a[j];
  });
  return s;
}

PolicyParams init_params(uint64_t seed) {
  Rng rng = Rng::keyed(seed, 0, kStreamPolicyInit);
  PolicyParams p;
  p.for_each_block([&](const char*, Mat& m) {
    if (m.cols == 1) return;  // biases start at zero
    double a = std::sqrt(6.0 / double(m.rows + m.cols));
    for (double& w : m.a) w = rng.uniform() * 2.0 * a - a;
  });
  return p;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

PolicyOutput policy_forward(const PolicyParams& P, const PolicyState& state_in,
                            const PolicyInput& input, const FactorGraph& g,
                            PolicyState& state_out, PolicyTape* tape) {
  const int n = g.num_vars;
  if (state_in.num_vars() != n)
    throw DimensionError("policy state size does not match graph");
  if (int(input.state_bits.size()) != n || int(input.abs_fields.size()) != n)
    throw DimensionError("policy input size does not match graph");

  PolicyTape local;
  PolicyTape& t = tape ? *tape : local;
  t.h_in = state_in.h_local;
  std::array<double, kGlobalHidden> hg_in_copy = state_in.h_global;
  t.hg_in = hg_in_copy;
  t.z.resize(size_t(n) * kLocalHidden);
  t.r.resize(size_t(n) * kLocalHidden);
  t.hcand.resize(size_t(n) * kLocalHidden);
  t.h_new.resize(size_t(n) * kLocalHidden);
  t.q.resize(size_t(n) * kLocalHidden);
  t.k.resize(size_t(n) * kLocalHidden);
  t.v.resize(size_t(n) * kLocalHidden);
  t.y.assign(size_t(n) * kLocalHidden, 0.0);
  t.mlp_hidden.resize(size_t(n) * kMlpHidden);
  t.logit.resize(n);
  t.p_raw.resize(n);
  t.p.resize(n);

  GruWeights lw{&P.lg_wz, &P.lg_wr, &P.lg_wh, &P.lg_uz, &P.lg_ur,
                &P.lg_uh, &P.lg_bz, &P.lg_br, &P.lg_bh};
  for (int i = 0; i < n; ++i) {
    double x[kLocalInput] = {input.state_bits[i], input.abs_fields[i]};
    size_t o = size_t(i) * kLocalHidden;
    gru_forward<kLocalHidden>(lw, x, &t.h_in[o], &t.z[o], &t.r[o], &t.hcand[o],
                              &t.h_new[o]);
    matvec(P.at_wq, &t.h_new[o], &t.q[o], false);
    matvec(P.at_wk, &t.h_new[o], &t.k[o], false);
    matvec(P.at_wv, &t.h_new[o], &t.v[o], false);
  }

  // per-factor self-attention, accumulated into node embeddings
  int nf = g.num_factors();
  t.alpha_offsets.assign(nf + 1, 0);
  for (int a = 0; a < nf; ++a) {
    int s = g.factor_size(a);
    t.alpha_offsets[a + 1] = t.alpha_offsets[a] + s * s;
  }
  t.alpha.assign(t.alpha_offsets[nf], 0.0);
  for (int a = 0; a < nf; ++a) {
    int s = g.factor_size(a);
    const VarIndex* mem = &g.factor_vars[g.factor_offsets[a]];
    double* al = &t.alpha[t.alpha_offsets[a]];
    for (int mi = 0; mi < s; ++mi) {
      const double* qi = &t.q[size_t(mem[mi]) * kLocalHidden];
      double* row = al + size_t(mi) * s;
      double mx = -1e300;
      for (int mj = 0; mj < s; ++mj) {
        const double* kj = &t.k[size_t(mem[mj]) * kLocalHidden];
        double score = 0.0;
        for (int d = 0; d < kLocalHidden; ++d) score += qi[d] * kj[d];
        row[mj] = score;
        mx = std::max(mx, score);
      }
      double sum = 0.0;
      for (int mj = 0; mj < s; ++mj) {
        row[mj] = std::exp(row[mj] - mx);
        sum += row[mj];
      }
      double* yi = &t.y[size_t(mem[mi]) * kLocalHidden];
      for (int mj = 0; mj < s; ++mj) {
        row[mj] /= sum;
        const double* vj = &t.v[size_t(mem[mj]) * kLocalHidden];
        for (int d = 0; d < kLocalHidden; ++d) yi[d] += row[mj] * vj[d];
      }
    }
  }
  // average over incident factors; isolated variables stay at zero
  for (int i = 0; i < n; ++i) {
    int deg = g.degree(i);
    if (deg > 1) {
      double inv = 1.0 / double(deg);
      double* yi = &t.y[size_t(i) * kLocalHidden];
      for (int d = 0; d < kLocalHidden; ++d) yi[d] *= inv;
    }
  }

  t.ybar.fill(0.0);
  for (int i = 0; i < n; ++i) {
    const double* yi = &t.y[size_t(i) * kLocalHidden];
    for (int d = 0; d < kLocalHidden; ++d) t.ybar[d] += yi[d];
  }
  if (n > 0)
    for (int d = 0; d < kLocalHidden; ++d) t.ybar[d] /= double(n);

  t.xg[0] = input.best_energy_norm;
  t.xg[1] = input.temperature;
  for (int d = 0; d < kLocalHidden; ++d) t.xg[2 + d] = t.ybar[d];
  GruWeights gw{&P.gg_wz, &P.gg_wr, &P.gg_wh, &P.gg_uz, &P.gg_ur,
                &P.gg_uh, &P.gg_bz, &P.gg_br, &P.gg_bh};
  gru_forward<kGlobalHidden>(gw, t.xg.data(), t.hg_in.data(), t.gz.data(),
                             t.gr.data(), t.ghcand.data(), t.hg_new.data());

  PolicyOutput out;
  out.p.resize(n);
  for (int i = 0; i < n; ++i) {
    double in[kMlpInput];
    const double* yi = &t.y[size_t(i) * kLocalHidden];
    for (int d = 0; d < kLocalHidden; ++d) in[d] = yi[d];
    for (int d = 0; d < kGlobalHidden; ++d) in[kLocalHidden + d] = t.hg_new[d];
    double* u = &t.mlp_hidden[size_t(i) * kMlpHidden];
    matvec(P.mlp_w1, in, u, false);
    for (int d = 0; d < kMlpHidden; ++d) u[d] = std::tanh(u[d] + P.mlp_b1.a[d]);
    double logit = P.mlp_b2.a[0];
    for (int d = 0; d < kMlpHidden; ++d) logit += P.mlp_w2.a[d] * u[d];
    t.logit[i] = logit;
    t.p_raw[i] = sigmoid(logit);
    t.p[i] = std::min(1.0 - kProbClamp, std::max(kProbClamp, t.p_raw[i]));
    out.p[i] = t.p[i];
  }
  double value = P.val_b.a[0];
  for (int d = 0; d < kGlobalHidden; ++d) value += P.val_w.a[d] * t.hg_new[d];
  t.value = value;
  out.value = value;

  state_out.h_local = t.h_new;
  state_out.h_global = t.hg_new;
  return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void policy_backward(const PolicyParams& P, const FactorGraph& g,
                     const PolicyInput& input, const PolicyTape& t,
                     const std::vector<double>& dp, double dvalue,
                     std::vector<double>& dh_local,
                     std::array<double, kGlobalHidden>& dh_global,
                     PolicyParams& grad) {
  const int n = g.num_vars;
  if (int(dp.size()) != n || int(dh_local.size()) != n * kLocalHidden)
    throw DimensionError("policy backward dimensions do not match graph");

  std::vector<double> dy(size_t(n) * kLocalHidden, 0.0);
  std::array<double, kGlobalHidden> dhg;
  dhg = dh_global;  // carry into this step's new global hidden

  // value head
  for (int d = 0; d < kGlobalHidden; ++d) {
    grad.val_w.a[d] += dvalue * t.hg_new[d];
    dhg[d] += P.val_w.a[d] * dvalue;
  }
  grad.val_b.a[0] += dvalue;

  // output MLP
  for (int i = 0; i < n; ++i) {
    double dpi = dp[i];
    if (t.p_raw[i] < kProbClamp || t.p_raw[i] > 1.0 - kProbClamp) dpi = 0.0;
    if (dpi == 0.0) continue;
    double dlogit = dpi * t.p_raw[i] * (1.0 - t.p_raw[i]);
    const double* u = &t.mlp_hidden[size_t(i) * kMlpHidden];
    double du[kMlpHidden], da1[kMlpHidden];
    for (int d = 0; d < kMlpHidden; ++d) {
      grad.mlp_w2.a[d] += dlogit * u[d];
      du[d] = P.mlp_w2.a[d] * dlogit;
      da1[d] = du[d] * (1.0 - u[d] * u[d]);
    }
    grad.mlp_b2.a[0] += dlogit;
    double in[kMlpInput];
    const double* yi = &t.y[size_t(i) * kLocalHidden];
    for (int d = 0; d < kLocalHidden; ++d) in[d] = yi[d];
    for (int d = 0; d < kGlobalHidden; ++d) in[kLocalHidden + d] = t.hg_new[d];
    outer_acc(grad.mlp_w1, da1, in);
    vec_acc(grad.mlp_b1, da1);
    double din[kMlpInput];
    matvec_t(P.mlp_w1, da1, din, false);
    double* dyi = &dy[size_t(i) * kLocalHidden];
    for (int d = 0; d < kLocalHidden; ++d) dyi[d] += din[d];
    for (int d = 0; d < kGlobalHidden; ++d) dhg[d] += din[kLocalHidden + d];
  }

  // global GRU
  GruWeights gw{&P.gg_wz, &P.gg_wr, &P.gg_wh, &P.gg_uz, &P.gg_ur,
                &P.gg_uh, &P.gg_bz, &P.gg_br, &P.gg_bh};
  GruGrads gg{&grad.gg_wz, &grad.gg_wr, &grad.gg_wh, &grad.gg_uz, &grad.gg_ur,
              &grad.gg_uh, &grad.gg_bz, &grad.gg_br, &grad.gg_bh};
  std::array<double, kGlobalHidden> dhg_in{};
  std::array<double, kGlobalInput> dxg{};
  gru_backward<kGlobalHidden>(gw, gg, t.xg.data(), t.hg_in.data(), t.gz.data(),
                              t.gr.data(), t.ghcand.data(), dhg.data(),
                              dhg_in.data(), dxg.data());
  dh_global = dhg_in;

  if (n > 0) {
    for (int i = 0; i < n; ++i) {
      double* dyi = &dy[size_t(i) * kLocalHidden];
      for (int d = 0; d < kLocalHidden; ++d)
        dyi[d] += dxg[2 + d] / double(n);
    }
  }

  // attention: dy -> dq, dk, dv
  std::vector<double> dq(size_t(n) * kLocalHidden, 0.0);
  std::vector<double> dk(size_t(n) * kLocalHidden, 0.0);
  std::vector<double> dv(size_t(n) * kLocalHidden, 0.0);
  int nf = g.num_factors();
  for (int a = 0; a < nf; ++a) {
    int s = g.factor_size(a);
    const VarIndex* mem = &g.factor_vars[g.factor_offsets[a]];
    const double* al = &t.alpha[t.alpha_offsets[a]];
    for (int mi = 0; mi < s; ++mi) {
      VarIndex vi = mem[mi];
      int deg = g.degree(vi);
      const double* dyi = &dy[size_t(vi) * kLocalHidden];
      double scale = 1.0 / double(deg);  // deg >= 1 for factor members
      const double* row = al + size_t(mi) * s;
      // dalpha_ij = (dy_i / deg) . v_j ; dv_j += alpha_ij * dy_i / deg
      if (s > 64)
        throw std::runtime_error("factor width > 64 unsupported in backward");
      double dal[64];
      double dot_sum = 0.0;
      for (int mj = 0; mj < s; ++mj) {
        const double* vj = &t.v[size_t(mem[mj]) * kLocalHidden];
        double d = 0.0;
        for (int dd = 0; dd < kLocalHidden; ++dd) d += dyi[dd] * vj[dd];
        d *= scale;
        dal[mj] = d;
        dot_sum += row[mj] * d;
        double* dvj = &dv[size_t(mem[mj]) * kLocalHidden];
        for (int dd = 0; dd < kLocalHidden; ++dd)
          dvj[dd] += row[mj] * scale * dyi[dd];
      }
      const double* qi = &t.q[size_t(vi) * kLocalHidden];
      double* dqi = &dq[size_t(vi) * kLocalHidden];
      for (int mj = 0; mj < s; ++mj) {
        double ds = row[mj] * (dal[mj] - dot_sum);
        if (ds == 0.0) continue;
        const double* kj = &t.k[size_t(mem[mj]) * kLocalHidden];
        double* dkj = &dk[size_t(mem[mj]) * kLocalHidden];
        for (int dd = 0; dd < kLocalHidden; ++dd) {
          dqi[dd] += ds * kj[dd];
          dkj[dd] += ds * qi[dd];
        }
      }
    }
  }

  // projections and local GRU; dh_local carries grad on h_new coming in
  GruWeights lw{&P.lg_wz, &P.lg_wr, &P.lg_wh, &P.lg_uz, &P.lg_ur,
                &P.lg_uh, &P.lg_bz, &P.lg_br, &P.lg_bh};
  GruGrads lg{&grad.lg_wz, &grad.lg_wr, &grad.lg_wh, &grad.lg_uz, &grad.lg_ur,
              &grad.lg_uh, &grad.lg_bz, &grad.lg_br, &grad.lg_bh};
  for (int i = 0; i < n; ++i) {
    size_t o = size_t(i) * kLocalHidden;
    double* dhn = &dh_local[o];
    outer_acc(grad.at_wq, &dq[o], &t.h_new[o]);
    outer_acc(grad.at_wk, &dk[o], &t.h_new[o]);
    outer_acc(grad.at_wv, &dv[o], &t.h_new[o]);
    double tmp[kLocalHidden];
    matvec_t(P.at_wq, &dq[o], tmp, false);
    for (int d = 0; d < kLocalHidden; ++d) dhn[d] += tmp[d];
    matvec_t(P.at_wk, &dk[o], tmp, false);
    for (int d = 0; d < kLocalHidden; ++d) dhn[d] += tmp[d];
    matvec_t(P.at_wv, &dv[o], tmp, false);
    for (int d = 0; d < kLocalHidden; ++d) dhn[d] += tmp[d];

    double x[kLocalInput] = {input.state_bits[i], input.abs_fields[i]};
    double dh_in[kLocalHidden];
    gru_backward<kLocalHidden>(lw, lg, x, &t.h_in[o], &t.z[o], &t.r[o],
                               &t.hcand[o], dhn, dh_in, nullptr);
    for (int d = 0; d < kLocalHidden; ++d) dh_local[o + d] = dh_in[d];
  }
}

// ---------------------------------------------------------------------------
// Action sampling
// ---------------------------------------------------------------------------

ActionSample sample_action(const std::vector<double>& p, Rng& rng) {
  ActionSample s;
  s.mask.resize(p.size());
  for (size_t i = 0; i < p.size(); ++i)
    s.mask[i] = rng.uniform() < p[i] ? 1 : 0;
  s.log_prob = action_log_prob(p, s.mask);
  s.entropy = action_entropy(p);
  return s;
}

double action_log_prob(const std::vector<double>& p,
                       const std::vector<uint8_t>& mask) {
  if (p.size() != mask.size())
    throw DimensionError("mask length does not match probabilities");
  double lp = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    lp += mask[i] ? std::log(p[i]) : std::log(1.0 - p[i]);
  return lp;
}

double action_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double pi : p)
    h -= pi * std::log(pi) + (1.0 - pi) * std::log(1.0 - pi);
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'N', 'M', 'C', 'A', 'R', 'R', 'S', '\0'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written little-endian");

template <class T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

}  // namespace

void save_params(std::ostream& out, const PolicyParams& p) {
  out.write(kMagic, 8);
  write_raw(out, kVersion);
  uint32_t count = 0;
  p.for_each_block([&](const char*, const Mat&) { ++count; });
  write_raw(out, count);
  p.for_each_block([&](const char* name, const Mat& m) {
    uint32_t len = uint32_t(std::strlen(name));
    write_raw(out, len);
    out.write(name, len);
    write_raw(out, uint32_t(2));
    write_raw(out, uint64_t(m.rows));
    write_raw(out, uint64_t(m.cols));
    out.write(reinterpret_cast<const char*>(m.a.data()),
              std::streamsize(m.a.size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_params(const std::string& path, const PolicyParams& p) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_params(f, p);
}

PolicyParams load_params(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a policy checkpoint (bad magic)");
  uint32_t version = read_raw<uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  uint32_t count = read_raw<uint32_t>(in);
  std::map<std::string, std::pair<std::pair<uint64_t, uint64_t>,
                                  std::vector<double>>>
      arrays;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = read_raw<uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    uint32_t rank = read_raw<uint32_t>(in);
    if (rank != 2)
      throw std::runtime_error("array `" + name + "`: unsupported rank " +
                               std::to_string(rank));
    uint64_t rows = read_raw<uint64_t>(in);
    uint64_t cols = read_raw<uint64_t>(in);
    std::vector<double> data(rows * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            std::streamsize(data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated in `" + name + "`");
    arrays[name] = {{rows, cols}, std::move(data)};
  }
  PolicyParams p;
  p.for_each_block([&](const char* name, Mat& m) {
    auto it = arrays.find(name);
    if (it == arrays.end())
      throw std::runtime_error("checkpoint is missing array `" +
                               std::string(name) + "`");
    auto& [dims, data] = it->second;
    if (dims.first != uint64_t(m.rows) || dims.second != uint64_t(m.cols)) {
      std::ostringstream msg;
      msg << "array `" << name << "`: expected " << m.rows << "x" << m.cols
          << ", found " << dims.first << "x" << dims.second;
      throw std::runtime_error(msg.str());
    }
    m.a = std::move(data);
    arrays.erase(it);
  });
  if (!arrays.empty())
    throw std::runtime_error("checkpoint has unexpected array `" +
                             arrays.begin()->first + "`");
  return p;
}

PolicyParams load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  return load_params(f);
}

}  // namespace nmc
