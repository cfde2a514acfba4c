#pragma once

// Brute-force reference implementations written directly from the model
// equations with nested loops over plain vectors. They share no code with
// the library beyond reading parameter values out of a ParamStore.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "unitygraph/unitygraph.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Rows = std::vector<Vec>;

inline Rows to_rows(const unitygraph::Matrix<double>& m) {
  Rows out(m.rows(), Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline const unitygraph::Matrix<double>& param(const unitygraph::ParamStore<double>& store, std::size_t idx) {
  return store[idx].value;
}

/// x W + b for a Linear layer.
inline Vec linear(const unitygraph::ParamStore<double>& store, const unitygraph::Linear& l, const Vec& x) {
  const auto& W = param(store, l.weight);
  Vec y(W.cols(), 0.0);
  for (std::size_t o = 0; o < W.cols(); ++o) {
    double acc = l.has_bias ? param(store, l.bias)(0, o) : 0.0;
    for (std::size_t i = 0; i < W.rows(); ++i) acc += x[i] * W(i, o);
    y[o] = acc;
  }
  return y;
}

inline Vec relu(Vec v) {
  for (auto& x : v) x = std::max(x, 0.0);
  return v;
}

inline double dot(const Vec& a, const Vec& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline Vec softmax(Vec logits) {
  for (auto& x : logits) x = std::clamp(x, -unitygraph::kLogitClamp, unitygraph::kLogitClamp);
  double hi = -1e300;
  for (double x : logits) hi = std::max(hi, x);
  double z = 0;
  for (auto& x : logits) z += (x = std::exp(x - hi));
  for (auto& x : logits) x /= z;
  return logits;
}

// ---------------------------------------------------------------- hypergraph

struct Edges {
  Rows short_term;  // index n*(T-1) + t
  Rows long_term;   // index n
  Rows spatial;     // index t
};

/// Node ids (n*T + t) of every hyperedge, family by family.
inline std::vector<std::vector<std::size_t>> members(int family, std::size_t N, std::size_t T) {
  std::vector<std::vector<std::size_t>> out;
  if (family == 0) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t + 1 < T; ++t) out.push_back({n * T + t, n * T + t + 1});
  } else if (family == 1) {
    for (std::size_t n = 0; n < N; ++n) {
      out.emplace_back();
      for (std::size_t t = 0; t < T; ++t) out.back().push_back(n * T + t);
    }
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      out.emplace_back();
      for (std::size_t n = 0; n < N; ++n) out.back().push_back(n * T + t);
    }
  }
  return out;
}

inline Rows& family_rows(Edges& e, int f) { return f == 0 ? e.short_term : f == 1 ? e.long_term : e.spatial; }

inline Edges init_edges(const Rows& g, std::size_t N, std::size_t T) {
  Edges e;
  for (int f = 0; f < 3; ++f)
    for (const auto& mem : members(f, N, T)) {
      Vec mean(g[0].size(), 0.0);
      for (std::size_t v : mem)
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += g[v][c];
      for (auto& x : mean) x /= static_cast<double>(mem.size());
      family_rows(e, f).push_back(mean);
    }
  return e;
}

struct MessagePassingResult {
  Rows nodes;
  Edges edges;
};

inline MessagePassingResult message_passing(const unitygraph::ParamStore<double>& store, const unitygraph::MessagePassing& mp,
                                            Rows g, std::size_t N, std::size_t T) {
  const std::size_t D = g[0].size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  Edges e = init_edges(g, N, T);
  for (const auto& layer : mp.layers) {
    Rows keys;
    for (const auto& v : g) keys.push_back(linear(store, layer.node_key, v));
    Edges next = e;
    for (int f = 0; f < 3; ++f) {
      if (!mp.config.enabled[static_cast<std::size_t>(f)]) continue;
      const auto mem = members(f, N, T);
      for (std::size_t k = 0; k < mem.size(); ++k) {
        const Vec q = linear(store, layer.edge_query, family_rows(e, f)[k]);
        Vec logits;
        for (std::size_t v : mem[k]) logits.push_back(dot(q, keys[v]) * scale);
        const Vec alpha = softmax(logits);
        Vec pooled(D, 0.0);
        for (std::size_t i = 0; i < mem[k].size(); ++i)
          for (std::size_t c = 0; c < D; ++c) pooled[c] += alpha[i] * g[mem[k][i]][c];
        Vec upd = relu(linear(store, layer.edge_message[f], pooled));
        for (std::size_t c = 0; c < D; ++c) upd[c] += family_rows(e, f)[k][c];
        family_rows(next, f)[k] = upd;
      }
    }
    Rows out = g;
    for (std::size_t v = 0; v < g.size(); ++v) {
      std::vector<std::pair<int, std::size_t>> incident;
      for (int f = 0; f < 3; ++f) {
        if (!mp.config.enabled[static_cast<std::size_t>(f)]) continue;
        const auto mem = members(f, N, T);
        for (std::size_t k = 0; k < mem.size(); ++k)
          if (std::find(mem[k].begin(), mem[k].end(), v) != mem[k].end()) incident.emplace_back(f, k);
      }
      Vec logits;
      for (auto [f, k] : incident) logits.push_back(dot(linear(store, layer.edge_query, family_rows(next, f)[k]), keys[v]) * scale);
      const Vec beta = softmax(logits);
      for (std::size_t i = 0; i < incident.size(); ++i) {
        const auto [f, k] = incident[i];
        Vec weighted = family_rows(next, f)[k];
        for (auto& x : weighted) x *= beta[i];
        const auto& mlp = layer.node_message[f];
        const Vec msg = linear(store, mlp.output, relu(linear(store, mlp.hidden, weighted)));
        for (std::size_t c = 0; c < D; ++c) out[v][c] += msg[c];
      }
    }
    g = out;
    e = next;
  }
  return {g, e};
}

// ---------------------------------------------------------------- encoder

/// Per-pose joint attention, straight from the skeleton's bone list.
inline Vec encode_pose(const unitygraph::ParamStore<double>& store, const unitygraph::PoseEncoder& enc,
                       const unitygraph::Skeleton& sk, const Vec& pose) {
  const std::size_t J = sk.joint_count(), D = enc.config.hidden_dim, H = enc.config.heads, w = D / H;
  std::vector<std::vector<std::size_t>> nb(J);
  for (std::size_t j = 0; j < J; ++j) nb[j].push_back(j);
  for (const auto& [a, b] : sk.edges) {
    nb[a].push_back(b);
    nb[b].push_back(a);
  }
  Rows q, k, v;
  for (std::size_t j = 0; j < J; ++j) {
    const Vec x{pose[3 * j], pose[3 * j + 1], pose[3 * j + 2]};
    q.push_back(linear(store, enc.query, x));
    k.push_back(linear(store, enc.key, x));
    v.push_back(linear(store, enc.value, x));
  }
  Vec pooled(D, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    Vec att(D, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      Vec logits;
      for (std::size_t i : nb[j]) {
        double s = 0;
        for (std::size_t c = h * w; c < (h + 1) * w; ++c) s += q[j][c] * k[i][c];
        logits.push_back(s / std::sqrt(static_cast<double>(w)));
      }
      const Vec a = softmax(logits);
      for (std::size_t m = 0; m < nb[j].size(); ++m)
        for (std::size_t c = h * w; c < (h + 1) * w; ++c) att[c] += a[m] * v[nb[j][m]][c];
    }
    const Vec ff = relu(linear(store, enc.joint_ff, att));
    for (std::size_t c = 0; c < D; ++c) pooled[c] += ff[c] / static_cast<double>(J);
  }
  return linear(store, enc.output, pooled);
}

// ---------------------------------------------------------------- decoder

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec gru(const unitygraph::ParamStore<double>& store, const unitygraph::Gru& g, const Vec& x, const Vec& h) {
  const Vec ir = linear(store, g.input_reset, x), hr = linear(store, g.hidden_reset, h);
  const Vec iu = linear(store, g.input_update, x), hu = linear(store, g.hidden_update, h);
  const Vec ic = linear(store, g.input_candidate, x), hc = linear(store, g.hidden_candidate, h);
  Vec out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double r = sigmoid(ir[i] + hr[i]);
    const double u = sigmoid(iu[i] + hu[i]);
    const double c = std::tanh(ic[i] + r * hc[i]);
    out[i] = (1.0 - u) * c + u * h[i];
  }
  return out;
}

/// Single-person rollout: with nobody to interact with, r = y and the decoder
/// is a plain recurrent pose predictor. Returns P poses.
inline Rows single_person_rollout(const unitygraph::ParamStore<double>& store, const unitygraph::InteractiveDecoder& dec,
                                  const Rows& Z, const Vec& x_T, std::size_t P) {
  Vec h(dec.config.hidden_dim, 0.0);
  for (const auto& z : Z) h = gru(store, dec.cell, linear(store, dec.node_in, z), h);
  h = gru(store, dec.cell, linear(store, dec.pose_in, x_T), h);
  Rows ys;
  Vec y = x_T;
  const Vec d0 = linear(store, dec.readout, h);
  for (std::size_t c = 0; c < y.size(); ++c) y[c] += d0[c];
  ys.push_back(y);
  while (ys.size() < P) {
    const Vec a = linear(store, dec.reason_in, y), b = linear(store, dec.pose_in, y);
    Vec x(a.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = a[i] + b[i];
    h = gru(store, dec.cell, x, h);
    const Vec d = linear(store, dec.readout, h);
    for (std::size_t c = 0; c < y.size(); ++c) y[c] += d[c];
    ys.push_back(y);
  }
  return ys;
}

// ---------------------------------------------------------------- metrics
// Poses indexed [person][frame][joint*3 + c].

using Scene = std::vector<Rows>;

inline double joint_distance(const Vec& a, const Vec& b, std::size_t j) {
  double s = 0;
  for (std::size_t c = 0; c < 3; ++c) s += (a[3 * j + c] - b[3 * j + c]) * (a[3 * j + c] - b[3 * j + c]);
  return std::sqrt(s);
}

/// Mean over the first k frames, persons and joints, in millimetres.
inline double mpjpe_mm(const Scene& pred, const Scene& truth, std::size_t k) {
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < pred.size(); ++n)
    for (std::size_t f = 0; f < k; ++f)
      for (std::size_t j = 0; j < pred[n][f].size() / 3; ++j, ++count) acc += joint_distance(pred[n][f], truth[n][f], j);
  return 1000.0 * acc / static_cast<double>(count);
}

/// Mean over persons of the stacked displacement norm at frame k (1-based), mm.
inline double vim_mm(const Scene& pred, const Scene& truth, std::size_t k) {
  double acc = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    double s = 0;
    for (std::size_t i = 0; i < pred[n][k - 1].size(); ++i) {
      const double d = pred[n][k - 1][i] - truth[n][k - 1][i];
      s += d * d;
    }
    acc += std::sqrt(s);
  }
  return 1000.0 * acc / static_cast<double>(pred.size());
}

/// Pearson correlation of root distances of joint j between persons a and b.
inline std::optional<double> ppc(const Rows& a, const Rows& b, std::size_t j) {
  const std::size_t F = a.size();
  auto dist = [j](const Vec& p) { return std::hypot(p[3 * j] - p[0], p[3 * j + 1] - p[1], p[3 * j + 2] - p[2]); };
  Vec x(F), y(F);
  for (std::size_t t = 0; t < F; ++t) {
    x[t] = dist(a[t]);
    y[t] = dist(b[t]);
  }
  double mx = 0, my = 0;
  for (std::size_t t = 0; t < F; ++t) mx += x[t] / F, my += y[t] / F;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t t = 0; t < F; ++t) {
    sxy += (x[t] - mx) * (y[t] - my);
    sxx += (x[t] - mx) * (x[t] - mx);
    syy += (y[t] - my) * (y[t] - my);
  }
  if (sxx < 1e-20 || syy < 1e-20) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

inline Scene scene_of(const unitygraph::Matrix<double>& m, std::size_t persons) {
  const std::size_t F = m.rows() / persons;
  Scene s(persons, Rows(F));
  for (std::size_t n = 0; n < persons; ++n)
    for (std::size_t f = 0; f < F; ++f) s[n][f].assign(m.row(n * F + f).begin(), m.row(n * F + f).end());
  return s;
}

// ---------------------------------------------------------------- helpers

inline unitygraph::Matrix<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  unitygraph::Matrix<double> m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
  return m;
}

template <class S>
void randomise(unitygraph::ParamStore<S>& store, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : store)
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<S>(u(rng));
}

inline double max_abs_diff(const Rows& a, const Rows& b) {
  double m = 0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) m = std::max(m, std::abs(a[r][c] - b[r][c]));
  return m;
}

}  // namespace oracle
