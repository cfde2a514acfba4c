#pragma once

// L rounds of hypergraph message passing. Each layer first updates every
// hyperedge from its member nodes, then every node from its incident
// (already updated) hyperedges:
//
//   alpha   = softmax over members of  (e We).(g Wg) / sqrt(D)
//   e'      = ReLU((sum alpha g) V_f + c_f) + e
//   beta    = softmax over incident edges of  (e' We).(g Wg) / sqrt(D)
//   g'      = sum_f MLP_f(beta e') + g
//
// We and Wg are shared by the three families within a layer.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/autodiff.hpp"
#include "unitygraph/hypergraph.hpp"
#include "unitygraph/layers.hpp"

namespace unitygraph {

struct MessagePassingConfig {
  std::size_t hidden_dim = 64;
  std::size_t layers = 3;
  std::size_t mlp_hidden = 64;
  std::array<bool, 3> enabled{true, true, true};  // indexed by EdgeFamily

  bool uses(EdgeFamily f) const { return enabled[static_cast<std::size_t>(f)]; }

  void validate() const {
    if (layers == 0) throw Error(ErrorKind::config_invalid, "message passing needs at least one layer");
    if (hidden_dim == 0 || mlp_hidden == 0) throw Error(ErrorKind::config_invalid, "hidden sizes must be positive");
    if (!enabled[0] && !enabled[1] && !enabled[2]) {
      throw Error(ErrorKind::config_invalid, "at least one hyperedge family must be enabled");
    }
  }
};

/// Attention weights of one layer, in the membership order of the topology.
/// beta[f] is empty for a disabled family.
struct AttentionRecord {
  std::size_t layer = 0;
  std::array<std::vector<double>, 3> alpha;
  std::array<std::vector<double>, 3> beta;
};

/// Aggregation terms actually summed, one per (member, edge) or (edge, node)
/// contribution. Multiply by D for scalar work.
struct MessageStats {
  std::uint64_t edge_messages = 0;
  std::uint64_t node_messages = 0;
  std::uint64_t total() const { return edge_messages + node_messages; }
};

/// Value-level snapshot of nodes and hyperedges at one layer.
template <class S>
struct HypergraphState {
  Matrix<S> nodes;  // [N*T, D]
  HyperedgeSet<S> edges;
  std::size_t layer = 0;
};

struct MessagePassingLayer {
  Linear edge_query;                // We
  Linear node_key;                  // Wg
  std::array<Linear, 3> edge_message;  // sigma branch, per family
  std::array<Mlp, 3> node_message;     // hyperedge-to-node MLPs, per family
};

struct MessagePassing {
  MessagePassingConfig config;
  std::vector<MessagePassingLayer> layers;

  template <class S>
  static MessagePassing create(ParamStore<S>& store, const MessagePassingConfig& cfg,
                               const std::string& prefix = "hypergraph") {
    cfg.validate();
    const std::size_t D = cfg.hidden_dim;
    MessagePassing mp;
    mp.config = cfg;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string p = prefix + ".layer" + std::to_string(l);
      MessagePassingLayer layer;
      layer.edge_query = Linear::create(store, p + ".edge_query", D, D, false);
      layer.node_key = Linear::create(store, p + ".node_key", D, D, false);
      for (auto f : kEdgeFamilies) {
        const auto i = static_cast<std::size_t>(f);
        layer.edge_message[i] = Linear::create(store, p + ".edge_message." + to_string(f), D, D);
        layer.node_message[i] = Mlp::create(store, p + ".node_message." + to_string(f), D, cfg.mlp_hidden, D);
      }
      mp.layers.push_back(layer);
    }
    return mp;
  }

  template <class S>
  S score_scale() const {
    return S(1) / std::sqrt(static_cast<S>(config.hidden_dim));
  }

  /// Node-to-hyperedge phase of layer l. Disabled families keep their edges.
  template <class S>
  EdgeVars<S> update_hyperedges(Tape<S>& tape, ParamStore<S>& store, std::size_t l, const HypergraphTopology& topo,
                                Var<S> nodes, const EdgeVars<S>& edges, AttentionRecord* record = nullptr,
                                MessageStats* stats = nullptr) const {
    const auto& layer = layers.at(l);
    const Var<S> keys = layer.node_key(tape, store, nodes);
    EdgeVars<S> out = edges;
    for (auto f : kEdgeFamilies) {
      if (!config.uses(f)) continue;
      const auto fi = static_cast<std::size_t>(f);
      const auto& m = topo.members(f);
      const Var<S> queries = layer.edge_query(tape, store, edges[f]);
      Var<S> logits = ad::scale(
          ad::rowdot_heads(ad::gather_rows(queries, m.edge), ad::gather_rows(keys, m.node)), score_scale<S>());
      logits = ad::clamp(logits, S(-kLogitClamp), S(kLogitClamp));
      const Var<S> alpha = ad::segment_softmax(logits, m.edge, m.edge_count);
      const Var<S> pooled = ad::segment_sum(ad::scale_heads(ad::gather_rows(nodes, m.node), alpha), m.edge, m.edge_count);
      out[f] = ad::add(ad::relu(layer.edge_message[fi](tape, store, pooled)), edges[f]);
      if (!out[f].value().all_finite()) {
        throw Error(ErrorKind::numeric_failure,
                    "non-finite " + to_string(f) + " hyperedge after layer " + std::to_string(l) + " update");
      }
      if (record != nullptr) {
        record->layer = l;
        record->alpha[fi].assign(alpha.value().storage().begin(), alpha.value().storage().end());
      }
      if (stats != nullptr) stats->edge_messages += m.size();
    }
    return out;
  }

  /// Hyperedge-to-node phase of layer l, reading edges already at layer l+1.
  template <class S>
  Var<S> update_nodes(Tape<S>& tape, ParamStore<S>& store, std::size_t l, const HypergraphTopology& topo,
                      Var<S> nodes, const EdgeVars<S>& next_edges, AttentionRecord* record = nullptr,
                      MessageStats* stats = nullptr) const {
    const auto& layer = layers.at(l);
    const Var<S> keys = layer.node_key(tape, store, nodes);

    std::vector<EdgeFamily> active;
    std::vector<Var<S>> logits;
    std::vector<std::size_t> node_of_logit;
    for (auto f : kEdgeFamilies) {
      if (!config.uses(f)) continue;
      const auto& m = topo.members(f);
      const Var<S> queries = layer.edge_query(tape, store, next_edges[f]);
      logits.push_back(ad::scale(
          ad::rowdot_heads(ad::gather_rows(queries, m.edge), ad::gather_rows(keys, m.node)), score_scale<S>()));
      node_of_logit.insert(node_of_logit.end(), m.node->begin(), m.node->end());
      active.push_back(f);
    }
    Var<S> all = ad::clamp(ad::concat_rows(logits), S(-kLogitClamp), S(kLogitClamp));
    const Var<S> beta = ad::segment_softmax(all, make_index(std::move(node_of_logit)), topo.node_count());

    Var<S> out = nodes;
    std::size_t offset = 0;
    for (auto f : active) {
      const auto fi = static_cast<std::size_t>(f);
      const auto& m = topo.members(f);
      const Var<S> b = ad::slice_rows(beta, offset, m.size());
      offset += m.size();
      const Var<S> weighted = ad::scale_heads(ad::gather_rows(next_edges[f], m.edge), b);
      const Var<S> message = layer.node_message[fi](tape, store, weighted);
      out = ad::add(out, ad::segment_sum(message, m.node, topo.node_count()));
      if (record != nullptr) {
        record->layer = l;
        record->beta[fi].assign(b.value().storage().begin(), b.value().storage().end());
      }
      if (stats != nullptr) stats->node_messages += m.size();
    }
    if (!out.value().all_finite()) {
      throw Error(ErrorKind::numeric_failure, "non-finite node embedding after layer " + std::to_string(l) + " update");
    }
    return out;
  }

  template <class S>
  struct Output {
    Var<S> nodes;
    EdgeVars<S> edges;
  };

  /// All L layers from layer-0 nodes. Returns final nodes (Z) and edges.
  template <class S>
  Output<S> run(Tape<S>& tape, ParamStore<S>& store, const HypergraphTopology& topo, Var<S> nodes0,
                std::vector<AttentionRecord>* records = nullptr, MessageStats* stats = nullptr) const {
    if (nodes0.cols() != config.hidden_dim) throw Error(ErrorKind::shape_mismatch, "node width differs from hidden_dim");
    Output<S> s{nodes0, init_hyperedges(nodes0, topo)};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      AttentionRecord rec;
      rec.layer = l;
      AttentionRecord* r = records != nullptr ? &rec : nullptr;
      s.edges = update_hyperedges(tape, store, l, topo, s.nodes, s.edges, r, stats);
      s.nodes = update_nodes(tape, store, l, topo, s.nodes, s.edges, r, stats);
      if (records != nullptr) records->push_back(std::move(rec));
    }
    return s;
  }

  // Value-level entry points.

  template <class S>
  std::pair<HypergraphState<S>, AttentionRecord> update_hyperedges(ParamStore<S>& store, const HypergraphTopology& topo,
                                                                   const HypergraphState<S>& state) const {
    Tape<S> tape;
    AttentionRecord rec;
    rec.layer = state.layer;
    auto e = update_hyperedges(tape, store, state.layer, topo, tape.constant(state.nodes), constants(tape, state.edges),
                               &rec);
    return {HypergraphState<S>{state.nodes, values(e), state.layer}, std::move(rec)};
  }

  /// Expects state.edges already at layer+1; returns the state at layer+1.
  template <class S>
  std::pair<HypergraphState<S>, AttentionRecord> update_nodes(ParamStore<S>& store, const HypergraphTopology& topo,
                                                              const HypergraphState<S>& state) const {
    Tape<S> tape;
    AttentionRecord rec;
    rec.layer = state.layer;
    auto g = update_nodes(tape, store, state.layer, topo, tape.constant(state.nodes), constants(tape, state.edges), &rec);
    return {HypergraphState<S>{g.value(), state.edges, state.layer + 1}, std::move(rec)};
  }

  template <class S>
  HypergraphState<S> run(ParamStore<S>& store, const HypergraphTopology& topo, const Matrix<S>& nodes0,
                         std::vector<AttentionRecord>* records = nullptr, MessageStats* stats = nullptr) const {
    Tape<S> tape;
    auto out = run(tape, store, topo, tape.constant(nodes0), records, stats);
    return {out.nodes.value(), values(out.edges), layers.size()};
  }

 private:
  template <class S>
  static EdgeVars<S> constants(Tape<S>& tape, const HyperedgeSet<S>& e) {
    EdgeVars<S> v;
    for (auto f : kEdgeFamilies) v[f] = tape.constant(e[f]);
    return v;
  }
  template <class S>
  static HyperedgeSet<S> values(const EdgeVars<S>& e) {
    return {e[EdgeFamily::short_term].value(), e[EdgeFamily::long_term].value(), e[EdgeFamily::spatial].value()};
  }
};

/// Heatmap export: for every layer, alpha grouped by hyperedge and beta
/// grouped by node. Each group's weights sum to one.
inline nlohmann::json attention_to_json(const std::vector<AttentionRecord>& records, const HypergraphTopology& topo) {
  const std::size_t T = topo.frames();
  auto layers = nlohmann::json::array();
  for (const auto& rec : records) {
    nlohmann::json layer;
    layer["layer"] = rec.layer;
    for (auto f : kEdgeFamilies) {
      const auto fi = static_cast<std::size_t>(f);
      const auto& m = topo.members(f);
      nlohmann::json fam;
      fam["enabled"] = !rec.alpha[fi].empty();
      std::vector<nlohmann::json> groups(m.edge_count);
      for (std::size_t e = 0; e < m.edge_count; ++e) groups[e] = {{"edge", e}, {"members", nlohmann::json::array()}};
      for (std::size_t i = 0; i < rec.alpha[fi].size(); ++i) {
        const std::size_t v = (*m.node)[i];
        groups[(*m.edge)[i]]["members"].push_back({{"person", v / T}, {"frame", v % T}, {"weight", rec.alpha[fi][i]}});
      }
      fam["alpha"] = rec.alpha[fi].empty() ? nlohmann::json::array() : nlohmann::json(groups);
      layer[to_string(f)] = std::move(fam);
    }
    std::vector<nlohmann::json> nodes(topo.node_count());
    for (std::size_t v = 0; v < nodes.size(); ++v)
      nodes[v] = {{"person", v / T}, {"frame", v % T}, {"edges", nlohmann::json::array()}};
    for (auto f : kEdgeFamilies) {
      const auto fi = static_cast<std::size_t>(f);
      const auto& m = topo.members(f);
      for (std::size_t i = 0; i < rec.beta[fi].size(); ++i)
        nodes[(*m.node)[i]]["edges"].push_back(
            {{"family", to_string(f)}, {"index", (*m.edge)[i]}, {"weight", rec.beta[fi][i]}});
    }
    layer["beta"] = std::move(nodes);
    layers.push_back(std::move(layer));
  }
  return {{"persons", topo.persons()}, {"frames", T}, {"layers", std::move(layers)}};
}

}  // namespace unitygraph
