#include "mgembed/multigraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mgembed/error.hpp"
#include "mgembed/rng.hpp"

namespace mgembed {

MultiGraph::MultiGraph(Index n_nodes, int n_domains) : n_nodes_(n_nodes) {
  if (n_nodes < 0) throw std::invalid_argument("node count must be non-negative");
  if (n_domains < 1) throw std::invalid_argument("a multigraph needs at least one domain");
  edges_.resize(static_cast<std::size_t>(n_domains));
  keys_.resize(static_cast<std::size_t>(n_domains));
}

void MultiGraph::check_domain(DomainId d) const {
  if (d < 0 || d >= n_domains()) {
    throw std::out_of_range("domain " + std::to_string(d) + " out of range [0, " +
                            std::to_string(n_domains()) + ")");
  }
}

std::uint64_t MultiGraph::pair_key(NodeId a, NodeId b) const noexcept {
  if (a > b) std::swap(a, b);
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n_nodes_) + static_cast<std::uint64_t>(b);
}

void MultiGraph::add_edge(DomainId d, NodeId a, NodeId b, double weight) {
  check_domain(d);
  if (a < 0 || b < 0 || a >= n_nodes_ || b >= n_nodes_) {
    throw std::invalid_argument("edge endpoint out of range: (" + std::to_string(a) + ", " + std::to_string(b) + ")");
  }
  if (a == b) throw std::invalid_argument("self-loop on node " + std::to_string(a));
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("edge weight must be finite and positive");
  }
  if (a > b) std::swap(a, b);
  auto& keys = keys_[static_cast<std::size_t>(d)];
  if (!keys.insert(pair_key(a, b)).second) {
    throw std::invalid_argument("duplicate edge (" + std::to_string(a) + ", " + std::to_string(b) + ") in domain " +
                                std::to_string(d));
  }
  edges_[static_cast<std::size_t>(d)].push_back(Edge{a, b, weight});
}

const std::vector<Edge>& MultiGraph::edges(DomainId d) const {
  check_domain(d);
  return edges_[static_cast<std::size_t>(d)];
}

std::size_t MultiGraph::max_domain_edges() const noexcept {
  std::size_t m = 0;
  for (const auto& e : edges_) m = std::max(m, e.size());
  return m;
}

bool MultiGraph::has_edge(DomainId d, NodeId a, NodeId b) const {
  check_domain(d);
  if (a == b || a < 0 || b < 0 || a >= n_nodes_ || b >= n_nodes_) return false;
  return keys_[static_cast<std::size_t>(d)].contains(pair_key(a, b));
}

bool MultiGraph::has_any_edge(NodeId a, NodeId b) const {
  for (int d = 0; d < n_domains(); ++d) {
    if (has_edge(d, a, b)) return true;
  }
  return false;
}

void MultiGraph::set_node_labels(std::vector<std::string> labels) {
  if (!labels.empty() && static_cast<Index>(labels.size()) != n_nodes_) {
    throw std::invalid_argument("label count does not match node count");
  }
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (!index.emplace(labels[k], static_cast<NodeId>(k)).second) {
      throw std::invalid_argument("duplicate node label '" + labels[k] + "'");
    }
  }
  labels_ = std::move(labels);
  label_index_ = std::move(index);
}

std::optional<NodeId> MultiGraph::find_label(std::string_view label) const {
  if (labels_.empty()) {
    // Unlabeled graphs are addressed by decimal index.
    NodeId v = 0;
    if (label.empty()) return std::nullopt;
    for (char c : label) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
      if (v >= n_nodes_) return std::nullopt;
    }
    return v;
  }
  auto it = label_index_.find(std::string(label));
  if (it == label_index_.end()) return std::nullopt;
  return it->second;
}

std::string MultiGraph::label(NodeId node) const {
  if (labels_.empty()) return std::to_string(node);
  return labels_.at(static_cast<std::size_t>(node));
}

std::uint64_t MultiGraph::domain_digest(DomainId d) const {
  std::vector<std::uint64_t> keys(keys_.at(static_cast<std::size_t>(d)).begin(),
                                  keys_.at(static_cast<std::size_t>(d)).end());
  std::sort(keys.begin(), keys.end());
  std::uint64_t h = mix64(static_cast<std::uint64_t>(n_nodes_));
  for (auto k : keys) h = mix64(h ^ k);
  return h;
}

namespace {

MultiGraph build_impl(const BehaviorSequences& seqs, std::vector<std::string> labels,
                      const std::unordered_map<std::string, NodeId>& index, std::int64_t min_weight) {
  const auto n = static_cast<Index>(labels.size());
  // Ordered map keeps edge order deterministic.
  std::vector<std::map<std::pair<NodeId, NodeId>, std::int64_t>> counts(static_cast<std::size_t>(seqs.n_domains));
  for (const auto& rec : seqs.records) {
    for (std::size_t k = 1; k < rec.items.size(); ++k) {
      NodeId a = index.at(rec.items[k - 1]);
      NodeId b = index.at(rec.items[k]);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      ++counts[static_cast<std::size_t>(rec.domain)][{a, b}];
    }
  }
  MultiGraph g(n, seqs.n_domains);
  for (int d = 0; d < seqs.n_domains; ++d) {
    for (const auto& [pair, c] : counts[static_cast<std::size_t>(d)]) {
      if (c >= min_weight) g.add_edge(d, pair.first, pair.second, static_cast<double>(c));
    }
  }
  g.set_node_labels(std::move(labels));
  return g;
}

void validate_sequences(const BehaviorSequences& seqs) {
  if (seqs.records.empty()) throw DataError("no behaviour sequences given");
  if (seqs.n_domains < 1) throw DataError("sequence set declares no domains");
  for (const auto& rec : seqs.records) {
    if (rec.domain < 0 || rec.domain >= seqs.n_domains) {
      throw DataError("unknown domain id " + std::to_string(rec.domain) + " for user '" + rec.user + "'");
    }
    if (rec.items.empty()) throw DataError("empty sequence for user '" + rec.user + "'");
    if (!rec.timestamps.empty() && rec.timestamps.size() != rec.items.size()) {
      throw DataError("timestamp count does not match item count for user '" + rec.user + "'");
    }
  }
}

}  // namespace

MultiGraph build_from_sequences(const BehaviorSequences& seqs, std::int64_t min_weight) {
  validate_sequences(seqs);
  std::vector<std::string> labels;
  std::unordered_map<std::string, NodeId> index;
  for (const auto& rec : seqs.records) {
    for (const auto& item : rec.items) {
      if (index.emplace(item, static_cast<NodeId>(labels.size())).second) labels.push_back(item);
    }
  }
  return build_impl(seqs, std::move(labels), index, min_weight);
}

MultiGraph build_from_sequences(const BehaviorSequences& seqs, const std::vector<std::string>& vocabulary,
                                std::int64_t min_weight) {
  validate_sequences(seqs);
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t k = 0; k < vocabulary.size(); ++k) index.emplace(vocabulary[k], static_cast<NodeId>(k));
  for (const auto& rec : seqs.records) {
    for (const auto& item : rec.items) {
      if (!index.contains(item)) throw DataError("item '" + item + "' is not in the vocabulary");
    }
  }
  return build_impl(seqs, vocabulary, index, min_weight);
}

namespace {

// Symmetric renormalization of (A + I) given as off-diagonal triplets.
SparseMatrix renormalize(Index n, const std::vector<Eigen::Triplet<double>>& off_diagonal) {
  std::vector<Eigen::Triplet<double>> trips = off_diagonal;
  trips.reserve(off_diagonal.size() + static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
  SparseMatrix a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Vector inv_sqrt_deg(n);
  for (Index i = 0; i < n; ++i) inv_sqrt_deg(i) = 1.0 / std::sqrt(a.row(i).sum());
  for (Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      it.valueRef() *= inv_sqrt_deg(i) * inv_sqrt_deg(it.col());
    }
  }
  a.makeCompressed();
  return a;
}

}  // namespace

NormalizedAdjacency union_adjacency(const MultiGraph& g) {
  if (g.n_nodes() < 1) throw std::invalid_argument("union_adjacency: graph has no nodes");
  std::unordered_set<std::uint64_t> seen;
  std::vector<Eigen::Triplet<double>> trips;
  const auto n = static_cast<std::uint64_t>(g.n_nodes());
  for (int d = 0; d < g.n_domains(); ++d) {
    for (const auto& e : g.edges(d)) {
      if (!seen.insert(static_cast<std::uint64_t>(e.i) * n + static_cast<std::uint64_t>(e.j)).second) continue;
      trips.emplace_back(e.i, e.j, 1.0);
      trips.emplace_back(e.j, e.i, 1.0);
    }
  }
  return NormalizedAdjacency{NormalizedAdjacency::Kind::kUnion, -1, renormalize(g.n_nodes(), trips)};
}

NormalizedAdjacency domain_adjacency(const MultiGraph& g, DomainId d) {
  if (d < 0 || d >= g.n_domains()) throw std::out_of_range("domain_adjacency: domain out of range");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.n_edges(d));
  for (const auto& e : g.edges(d)) {
    trips.emplace_back(e.i, e.j, e.weight);
    trips.emplace_back(e.j, e.i, e.weight);
  }
  return NormalizedAdjacency{NormalizedAdjacency::Kind::kDomain, d, renormalize(g.n_nodes(), trips)};
}

}  // namespace mgembed
