#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mgembed/types.hpp"

namespace mgembed {

// Undirected weighted edge, stored canonically with i < j.
struct Edge {
  NodeId i = 0;
  NodeId j = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// One node set shared by D domains, each domain owning its own weighted
// edge set. Endpoints lie in [0, n_nodes), self-loops are rejected and each
// unordered pair appears at most once per domain.
class MultiGraph {
 public:
  MultiGraph() = default;
  MultiGraph(Index n_nodes, int n_domains);

  Index n_nodes() const noexcept { return n_nodes_; }
  int n_domains() const noexcept { return static_cast<int>(edges_.size()); }

  // Throws std::invalid_argument on a bad endpoint, domain, weight or
  // duplicate pair.
  void add_edge(DomainId d, NodeId a, NodeId b, double weight);

  const std::vector<Edge>& edges(DomainId d) const;
  std::size_t n_edges(DomainId d) const { return edges(d).size(); }
  std::size_t max_domain_edges() const noexcept;

  bool has_edge(DomainId d, NodeId a, NodeId b) const;
  bool has_any_edge(NodeId a, NodeId b) const;

  // Optional external ids; empty when nodes are plain integers.
  const std::vector<std::string>& node_labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return !labels_.empty(); }
  void set_node_labels(std::vector<std::string> labels);
  std::optional<NodeId> find_label(std::string_view label) const;
  // External id of a node: its label, or the decimal index when unlabeled.
  std::string label(NodeId node) const;

  // Order-independent hash of the edge structure (pairs only) of domain d.
  std::uint64_t domain_digest(DomainId d) const;

  friend bool operator==(const MultiGraph& a, const MultiGraph& b) {
    return a.n_nodes_ == b.n_nodes_ && a.edges_ == b.edges_ && a.labels_ == b.labels_;
  }

 private:
  void check_domain(DomainId d) const;
  std::uint64_t pair_key(NodeId a, NodeId b) const noexcept;

  Index n_nodes_ = 0;
  std::vector<std::vector<Edge>> edges_;
  std::vector<std::unordered_set<std::uint64_t>> keys_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> label_index_;
};

// A single (user, domain) behaviour session.
struct SequenceRecord {
  std::string user;
  DomainId domain = 0;
  std::vector<std::string> items;
  // Either empty or one integer timestamp per item.
  std::vector<std::int64_t> timestamps;
};

struct BehaviorSequences {
  int n_domains = 0;
  std::vector<SequenceRecord> records;
};

// Item co-occurrence multigraph: an edge joins two items that appear next to
// each other in some sequence of that domain, weighted by the number of such
// adjacent occurrences over all users. Items are indexed in order of first
// appearance and keep their ids as node labels.
MultiGraph build_from_sequences(const BehaviorSequences& seqs, std::int64_t min_weight = 1);

// Same, but indexes items through an existing vocabulary (items missing from
// it are an error). Used to keep node ids aligned with a previously built
// graph.
MultiGraph build_from_sequences(const BehaviorSequences& seqs, const std::vector<std::string>& vocabulary,
                                std::int64_t min_weight = 1);

// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I.
struct NormalizedAdjacency {
  enum class Kind { kUnion, kDomain };

  Kind kind = Kind::kUnion;
  DomainId domain = -1;
  SparseMatrix matrix;

  Index size() const noexcept { return matrix.rows(); }
  Matrix dense() const { return Matrix(matrix); }
};

// Binary adjacency over all domains (an edge in any domain counts once).
NormalizedAdjacency union_adjacency(const MultiGraph& g);

// Weighted adjacency of one domain.
NormalizedAdjacency domain_adjacency(const MultiGraph& g, DomainId d);

}  // namespace mgembed
