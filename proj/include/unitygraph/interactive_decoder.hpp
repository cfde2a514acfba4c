#pragma once

// Autoregressive decoder with relation reasoning.
//
// First step: a GRU reads Z[n, 0..T-1] W_z and then x_T[n] W_p; the pose is
// read out residually, y_{T+1} = x_T + h W_o. Interactions are computed from
// the final-layer nodes g_T:
//   I(n, m) = softmax_{m != n}(q(g_n) . k(g_m) / sqrt(3J)) v(g_m)
//   r_{T+1}[n] = sum_m I(n, m) + y_{T+1}[n]
// Later steps feed r_{p-1} W_r + y_{p-1} W_p to the GRU, read out
// y_p = y_{p-1} + h W_o, and recompute I from r_{p-1} with a second set of
// projections (pose-shaped keys instead of node embeddings).

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "unitygraph/autodiff.hpp"
#include "unitygraph/layers.hpp"

namespace unitygraph {

struct DecoderConfig {
  std::size_t node_dim = 64;     // D
  std::size_t hidden_dim = 128;  // H
  std::size_t pose_dim = 45;     // 3J

  void validate() const {
    if (node_dim == 0 || hidden_dim == 0 || pose_dim == 0 || pose_dim % 3 != 0) {
      throw Error(ErrorKind::config_invalid, "decoder dimensions must be positive and pose_dim a multiple of 3");
    }
  }
};

/// Gated recurrent unit, PyTorch gate convention.
struct Gru {
  Linear input_reset, input_update, input_candidate;
  Linear hidden_reset, hidden_update, hidden_candidate;

  template <class S>
  static Gru create(ParamStore<S>& store, const std::string& name, std::size_t in, std::size_t hidden) {
    Gru g;
    g.input_reset = Linear::create(store, name + ".input_reset", in, hidden);
    g.input_update = Linear::create(store, name + ".input_update", in, hidden);
    g.input_candidate = Linear::create(store, name + ".input_candidate", in, hidden);
    g.hidden_reset = Linear::create(store, name + ".hidden_reset", hidden, hidden);
    g.hidden_update = Linear::create(store, name + ".hidden_update", hidden, hidden);
    g.hidden_candidate = Linear::create(store, name + ".hidden_candidate", hidden, hidden);
    return g;
  }

  //   r = s(x Wir + h Whr),  u = s(x Wiu + h Whu)
  //   c = tanh(x Wic + r * (h Whc)),  h' = (1 - u) * c + u * h
  template <class S>
  Var<S> operator()(Tape<S>& tape, ParamStore<S>& store, Var<S> x, Var<S> h) const {
    Var<S> r = ad::sigmoid(ad::add(input_reset(tape, store, x), hidden_reset(tape, store, h)));
    Var<S> u = ad::sigmoid(ad::add(input_update(tape, store, x), hidden_update(tape, store, h)));
    Var<S> c = ad::tanh(ad::add(input_candidate(tape, store, x), ad::hadamard(r, hidden_candidate(tape, store, h))));
    return ad::add(ad::hadamard(ad::affine(u, S(-1), S(1)), c), ad::hadamard(u, h));
  }
};

/// Ordered pairs (n, m), m != n, grouped by n.
struct PersonPairs {
  std::size_t persons = 0;
  Index query;  // n
  Index key;    // m

  explicit PersonPairs(std::size_t n_persons) : persons(n_persons) {
    std::vector<std::size_t> q, k;
    for (std::size_t n = 0; n < persons; ++n)
      for (std::size_t m = 0; m < persons; ++m)
        if (m != n) {
          q.push_back(n);
          k.push_back(m);
        }
    query = make_index(std::move(q));
    key = make_index(std::move(k));
  }
  std::size_t size() const { return query->size(); }
};

/// Scaled dot-product attention over the other persons.
struct RelationAttention {
  Linear query, key, value;

  template <class S>
  static RelationAttention create(ParamStore<S>& store, const std::string& name, std::size_t in, std::size_t pose_dim) {
    return {Linear::create(store, name + ".query", in, pose_dim), Linear::create(store, name + ".key", in, pose_dim),
            Linear::create(store, name + ".value", in, pose_dim)};
  }

  template <class S>
  struct Result {
    Var<S> interactions;  // [pairs, 3J], I(n, m) in PersonPairs order
    Var<S> weights;       // [pairs, 1]
    Var<S> summed;        // [N, 3J], sum over m of I(n, m)
  };

  template <class S>
  Result<S> operator()(Tape<S>& tape, ParamStore<S>& store, Var<S> source, const PersonPairs& pairs) const {
    const Var<S> q = query(tape, store, source);
    const Var<S> k = key(tape, store, source);
    const Var<S> v = value(tape, store, source);
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(q.cols()));
    Var<S> logits = ad::scale(ad::rowdot_heads(ad::gather_rows(q, pairs.query), ad::gather_rows(k, pairs.key)), inv_sqrt);
    logits = ad::clamp(logits, S(-kLogitClamp), S(kLogitClamp));
    const Var<S> w = ad::segment_softmax(logits, pairs.query, pairs.persons);
    const Var<S> inter = ad::scale_heads(ad::gather_rows(v, pairs.key), w);
    return {inter, w, ad::segment_sum(inter, pairs.query, pairs.persons)};
  }
};

/// Value snapshot of one decoding step.
template <class S>
struct ReasoningState {
  std::size_t step = 0;     // 1-based offset past the observed window (p - T)
  Matrix<S> y_hat;          // [N, 3J]
  Matrix<S> r_hat;          // [N, 3J]
  Matrix<S> interactions;   // [N(N-1), 3J], pairs (n, m) grouped by n
  Matrix<S> weights;        // [N(N-1), 1]
};

template <class S>
struct PredictionOutput {
  Matrix<S> poses;  // [N*P, 3J], row n*P + (p - T - 1)
  std::vector<ReasoningState<S>> trace;
};

struct InteractiveDecoder {
  DecoderConfig config;
  Linear node_in;     // D -> H
  Linear pose_in;     // 3J -> H
  Linear reason_in;   // 3J -> H, no bias
  Gru cell;
  Linear readout;     // H -> 3J
  RelationAttention first_relation;  // over node embeddings
  RelationAttention relation;        // over reasoning vectors

  template <class S>
  static InteractiveDecoder create(ParamStore<S>& store, const DecoderConfig& cfg, const std::string& prefix = "decoder") {
    cfg.validate();
    InteractiveDecoder d;
    d.config = cfg;
    const std::size_t D = cfg.node_dim, H = cfg.hidden_dim, Q = cfg.pose_dim;
    d.node_in = Linear::create(store, prefix + ".node_in", D, H);
    d.pose_in = Linear::create(store, prefix + ".pose_in", Q, H);
    d.reason_in = Linear::create(store, prefix + ".reason_in", Q, H, false);
    d.cell = Gru::create(store, prefix + ".gru", H, H);
    d.readout = Linear::create(store, prefix + ".readout", H, Q);
    d.first_relation = RelationAttention::create(store, prefix + ".relation_first", D, Q);
    d.relation = RelationAttention::create(store, prefix + ".relation", Q, Q);
    return d;
  }

  /// Recurrent state carried between steps.
  template <class S>
  struct State {
    std::size_t step = 0;
    std::size_t horizon = 0;
    Var<S> hidden;  // [N, H]
    Var<S> y_hat;   // [N, 3J]
    Var<S> r_hat;   // [N, 3J]
    Var<S> interactions;
    Var<S> weights;
  };

  template <class S>
  void check_inputs(Var<S> Z, Var<S> x_T, std::size_t persons) const {
    if (persons == 0 || Z.rows() % persons != 0 || Z.cols() != config.node_dim) {
      throw Error(ErrorKind::shape_mismatch, "decoder expects Z of shape [N*T, D]");
    }
    if (x_T.rows() != persons || x_T.cols() != config.pose_dim) {
      throw Error(ErrorKind::shape_mismatch, "decoder expects x_T of shape [N, 3J]");
    }
  }

  /// Rows n*T + t of Z for fixed t, one per person.
  static Index frame_rows(std::size_t persons, std::size_t frames, std::size_t t) {
    std::vector<std::size_t> rows(persons);
    for (std::size_t n = 0; n < persons; ++n) rows[n] = n * frames + t;
    return make_index(std::move(rows));
  }

  template <class S>
  State<S> first_step(Tape<S>& tape, ParamStore<S>& store, Var<S> Z, Var<S> x_T, std::size_t persons,
                      std::size_t horizon) const {
    check_inputs(Z, x_T, persons);
    if (horizon == 0) throw Error(ErrorKind::horizon_out_of_range, "prediction horizon must be at least 1");
    const std::size_t T = Z.rows() / persons;
    const Var<S> tokens = node_in(tape, store, Z);
    Var<S> h = tape.constant(Matrix<S>(persons, config.hidden_dim));
    for (std::size_t t = 0; t < T; ++t) h = cell(tape, store, ad::gather_rows(tokens, frame_rows(persons, T, t)), h);
    h = cell(tape, store, pose_in(tape, store, x_T), h);
    const Var<S> y = ad::add(x_T, readout(tape, store, h));

    const PersonPairs pairs(persons);
    const auto rel = first_relation(tape, store, ad::gather_rows(Z, frame_rows(persons, T, T - 1)), pairs);
    return {1, horizon, h, y, ad::add(rel.summed, y), rel.interactions, rel.weights};
  }

  template <class S>
  State<S> step(Tape<S>& tape, ParamStore<S>& store, const State<S>& prev) const {
    if (prev.step >= prev.horizon) {
      throw Error(ErrorKind::step_overflow, "decoder step " + std::to_string(prev.step + 1) + " exceeds horizon " +
                                                std::to_string(prev.horizon));
    }
    const Var<S> x = ad::add(reason_in(tape, store, prev.r_hat), pose_in(tape, store, prev.y_hat));
    const Var<S> h = cell(tape, store, x, prev.hidden);
    const Var<S> y = ad::add(prev.y_hat, readout(tape, store, h));
    const PersonPairs pairs(prev.y_hat.rows());
    const auto rel = relation(tape, store, prev.r_hat, pairs);
    return {prev.step + 1, prev.horizon, h, y, ad::add(rel.summed, y), rel.interactions, rel.weights};
  }

  template <class S>
  struct Rollout {
    Var<S> poses;  // [N*P, 3J], person-major
    std::vector<State<S>> states;
  };

  template <class S>
  Rollout<S> decode(Tape<S>& tape, ParamStore<S>& store, Var<S> Z, Var<S> x_T, std::size_t persons,
                    std::size_t horizon) const {
    Rollout<S> out;
    out.states.push_back(first_step(tape, store, Z, x_T, persons, horizon));
    while (out.states.size() < horizon) out.states.push_back(step(tape, store, out.states.back()));
    std::vector<Var<S>> ys;
    for (const auto& s : out.states) ys.push_back(s.y_hat);
    out.poses = person_major(ad::concat_rows(ys), persons, horizon);
    return out;
  }

  /// Ground-truth reasoning vectors r_p from future poses Y [N*P, 3J]; same
  /// recursion with y_p in place of the predictions. One [N, 3J] per step.
  template <class S>
  std::vector<Var<S>> teacher_forced_reasoning(Tape<S>& tape, ParamStore<S>& store, Var<S> Z, Var<S> Y,
                                               std::size_t persons) const {
    if (persons == 0 || Y.rows() % persons != 0 || Y.cols() != config.pose_dim) {
      throw Error(ErrorKind::shape_mismatch, "teacher forcing expects Y of shape [N*P, 3J]");
    }
    if (Z.rows() % persons != 0 || Z.cols() != config.node_dim) {
      throw Error(ErrorKind::shape_mismatch, "decoder expects Z of shape [N*T, D]");
    }
    const std::size_t T = Z.rows() / persons;
    const std::size_t P = Y.rows() / persons;
    const PersonPairs pairs(persons);
    std::vector<Var<S>> r;
    for (std::size_t p = 0; p < P; ++p) {
      const Var<S> y = ad::gather_rows(Y, frame_rows(persons, P, p));
      const auto rel = p == 0 ? first_relation(tape, store, ad::gather_rows(Z, frame_rows(persons, T, T - 1)), pairs)
                              : relation(tape, store, r.back(), pairs);
      r.push_back(ad::add(rel.summed, y));
    }
    return r;
  }

  /// Step-major [P*N] rows to person-major [N*P].
  template <class S>
  static Var<S> person_major(Var<S> step_major, std::size_t persons, std::size_t steps) {
    std::vector<std::size_t> rows(persons * steps);
    for (std::size_t n = 0; n < persons; ++n)
      for (std::size_t p = 0; p < steps; ++p) rows[n * steps + p] = p * persons + n;
    return ad::gather_rows(step_major, make_index(std::move(rows)));
  }

  // Value-level entry points.

  template <class S>
  PredictionOutput<S> decode(ParamStore<S>& store, const Matrix<S>& Z, const Matrix<S>& x_T, std::size_t horizon) const {
    Tape<S> tape;
    const auto roll = decode(tape, store, tape.constant(Z), tape.constant(x_T), x_T.rows(), horizon);
    PredictionOutput<S> out;
    out.poses = roll.poses.value();
    for (const auto& s : roll.states) out.trace.push_back(snapshot(s));
    return out;
  }

  template <class S>
  std::vector<Matrix<S>> teacher_forced_reasoning(ParamStore<S>& store, const Matrix<S>& Z, const Matrix<S>& Y,
                                                  std::size_t persons) const {
    Tape<S> tape;
    std::vector<Matrix<S>> out;
    for (const auto& r : teacher_forced_reasoning(tape, store, tape.constant(Z), tape.constant(Y), persons))
      out.push_back(r.value());
    return out;
  }

  template <class S>
  static ReasoningState<S> snapshot(const State<S>& s) {
    return {s.step, s.y_hat.value(), s.r_hat.value(), s.interactions.value(), s.weights.value()};
  }
};

/// Per-step interactions and reasoning vectors for plotting.
template <class S>
nlohmann::json trace_to_json(const std::vector<ReasoningState<S>>& trace, std::size_t observed_frames) {
  auto rows = [](const Matrix<S>& m) {
    auto out = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return out;
  };
  auto steps = nlohmann::json::array();
  for (const auto& s : trace) {
    const std::size_t N = s.r_hat.rows();
    auto pairs = nlohmann::json::array();
    std::size_t k = 0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t m = 0; m < N; ++m)
        if (m != n) {
          pairs.push_back({{"from", n},
                           {"to", m},
                           {"weight", static_cast<double>(s.weights(k, 0))},
                           {"interaction", std::vector<double>(s.interactions.row(k).begin(), s.interactions.row(k).end())}});
          ++k;
        }
    steps.push_back({{"frame", observed_frames + s.step}, {"r_hat", rows(s.r_hat)}, {"y_hat", rows(s.y_hat)}, {"pairs", std::move(pairs)}});
  }
  return {{"steps", std::move(steps)}};
}

}  // namespace unitygraph
