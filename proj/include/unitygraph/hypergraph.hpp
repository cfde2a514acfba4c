#pragma once

// Hypervariate graph over N persons x T frames. Node (n, t) has row n*T + t.
//   short-term edge (n, t), t < T-1 : members (n, t), (n, t+1)   row n*(T-1) + t
//   long-term edge  n               : members (n, 0..T-1)        row n
//   spatial edge    t               : members (0..N-1, t)        row t

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/autodiff.hpp"
#include "unitygraph/error.hpp"

namespace unitygraph {

enum class EdgeFamily : std::uint8_t { short_term = 0, long_term = 1, spatial = 2 };

inline constexpr std::array<EdgeFamily, 3> kEdgeFamilies{EdgeFamily::short_term, EdgeFamily::long_term,
                                                         EdgeFamily::spatial};

inline std::string to_string(EdgeFamily f) {
  switch (f) {
    case EdgeFamily::short_term: return "short_term";
    case EdgeFamily::long_term: return "long_term";
    case EdgeFamily::spatial: return "spatial";
  }
  return "?";
}

struct HyperedgeId {
  EdgeFamily family;
  std::size_t index;
  friend bool operator==(const HyperedgeId&, const HyperedgeId&) = default;
};

/// (node, edge) membership pairs of one family, grouped by edge.
struct MembershipList {
  Index node;
  Index edge;
  std::size_t edge_count = 0;
  std::size_t size() const { return node->size(); }
};

class HypergraphTopology {
 public:
  HypergraphTopology(std::size_t persons, std::size_t frames) : persons_(persons), frames_(frames) {
    if (persons == 0) throw Error(ErrorKind::shape_mismatch, "hypergraph needs at least one person");
    if (frames < 2) throw Error(ErrorKind::too_few_frames, "hypergraph needs T >= 2 frames");
    const std::size_t N = persons, T = frames;

    std::vector<std::size_t> node, edge;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t + 1 < T; ++t) {
        for (std::size_t k = 0; k < 2; ++k) {
          node.push_back(node_id(n, t + k));
          edge.push_back(n * (T - 1) + t);
        }
      }
    lists_[0] = {make_index(node), make_index(edge), N * (T - 1)};

    node.clear();
    edge.clear();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < T; ++t) {
        node.push_back(node_id(n, t));
        edge.push_back(n);
      }
    lists_[1] = {make_index(node), make_index(edge), N};

    node.clear();
    edge.clear();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n) {
        node.push_back(node_id(n, t));
        edge.push_back(t);
      }
    lists_[2] = {make_index(node), make_index(edge), T};

    incidence_.resize(N * T);
    for (auto f : kEdgeFamilies) {
      const auto& l = members(f);
      for (std::size_t i = 0; i < l.size(); ++i) incidence_[(*l.node)[i]].push_back({f, (*l.edge)[i]});
    }
  }

  std::size_t persons() const noexcept { return persons_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t node_count() const noexcept { return persons_ * frames_; }
  std::size_t node_id(std::size_t n, std::size_t t) const noexcept { return n * frames_ + t; }

  std::size_t edge_count(EdgeFamily f) const { return members(f).edge_count; }
  const MembershipList& members(EdgeFamily f) const { return lists_[static_cast<std::size_t>(f)]; }

  /// Nodes belonging to one hyperedge.
  std::vector<std::size_t> members_of(HyperedgeId id) const {
    std::vector<std::size_t> out;
    const auto& l = members(id.family);
    for (std::size_t i = 0; i < l.size(); ++i)
      if ((*l.edge)[i] == id.index) out.push_back((*l.node)[i]);
    return out;
  }

  /// Hyperedges incident to a node, ordered short-term, long-term, spatial.
  const std::vector<HyperedgeId>& incident(std::size_t node) const { return incidence_[node]; }

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["persons"] = persons_;
    doc["frames"] = frames_;
    auto edges = nlohmann::json::array();
    for (auto f : kEdgeFamilies)
      for (std::size_t e = 0; e < edge_count(f); ++e) {
        auto nodes = nlohmann::json::array();
        for (std::size_t v : members_of({f, e})) nodes.push_back({{"person", v / frames_}, {"frame", v % frames_}});
        edges.push_back({{"family", to_string(f)}, {"index", e}, {"members", std::move(nodes)}});
      }
    doc["hyperedges"] = std::move(edges);
    auto inc = nlohmann::json::array();
    for (std::size_t v = 0; v < node_count(); ++v) {
      auto list = nlohmann::json::array();
      for (const auto& h : incidence_[v]) list.push_back({{"family", to_string(h.family)}, {"index", h.index}});
      inc.push_back({{"person", v / frames_}, {"frame", v % frames_}, {"edges", std::move(list)}});
    }
    doc["incidence"] = std::move(inc);
    return doc;
  }

 private:
  std::size_t persons_;
  std::size_t frames_;
  std::array<MembershipList, 3> lists_;
  std::vector<std::vector<HyperedgeId>> incidence_;
};

/// Hyperedge embeddings on the tape, one matrix per family.
template <class S>
struct EdgeVars {
  std::array<Var<S>, 3> family;
  Var<S>& operator[](EdgeFamily f) { return family[static_cast<std::size_t>(f)]; }
  const Var<S>& operator[](EdgeFamily f) const { return family[static_cast<std::size_t>(f)]; }
};

/// Mean-aggregation initialisation of all three families from layer-0 nodes.
template <class S>
EdgeVars<S> init_hyperedges(Var<S> nodes, const HypergraphTopology& topo) {
  if (nodes.rows() != topo.node_count()) throw Error(ErrorKind::shape_mismatch, "node grid does not match topology");
  EdgeVars<S> out;
  for (auto f : kEdgeFamilies) {
    const auto& l = topo.members(f);
    out[f] = ad::segment_mean(ad::gather_rows(nodes, l.node), l.edge, l.edge_count);
  }
  return out;
}

/// Value-level hyperedge set (short-term [N*(T-1), D], long-term [N, D], spatial [T, D]).
template <class S>
struct HyperedgeSet {
  Matrix<S> short_term;
  Matrix<S> long_term;
  Matrix<S> spatial;

  Matrix<S>& operator[](EdgeFamily f) {
    return f == EdgeFamily::short_term ? short_term : f == EdgeFamily::long_term ? long_term : spatial;
  }
  const Matrix<S>& operator[](EdgeFamily f) const {
    return f == EdgeFamily::short_term ? short_term : f == EdgeFamily::long_term ? long_term : spatial;
  }
};

template <class S>
HyperedgeSet<S> init_hyperedges(const Matrix<S>& nodes, const HypergraphTopology& topo) {
  Tape<S> tape;
  auto e = init_hyperedges(tape.constant(nodes), topo);
  return {e[EdgeFamily::short_term].value(), e[EdgeFamily::long_term].value(), e[EdgeFamily::spatial].value()};
}

struct MessageCost {
  std::uint64_t unitygraph_cost = 0;
  std::uint64_t fully_connected_cost = 0;
};

/// Analytic aggregation cost of one hypergraph update versus a dense graph
/// over the same N*T nodes (k = 4 hyperedges per node).
inline MessageCost count_messages(std::uint64_t N, std::uint64_t T, std::uint64_t d) {
  if (N == 0 || T == 0 || d == 0) throw Error(ErrorKind::config_invalid, "count_messages needs N, T, d >= 1");
  constexpr std::uint64_t k = 4;
  MessageCost c;
  c.unitygraph_cost = N * T * d * k + (2 * N * T + N * (T - 1)) * d;
  c.fully_connected_cost = (N * T) * (N * T) * d;
  return c;
}

}  // namespace unitygraph
