#include "mgembed/link_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "mgembed/error.hpp"
#include "mgembed/objective.hpp"
#include "mgembed/rng.hpp"

namespace mgembed {

namespace {

std::uint64_t key_of(NodeId a, NodeId b, Index n) {
  if (a > b) std::swap(a, b);
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(b);
}

// `count` distinct non-edges of domain d, none in `taken`.
std::vector<NodePair> sample_non_edges(const MultiGraph& g, DomainId d, std::size_t count,
                                       std::unordered_set<std::uint64_t>& taken, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(g.n_nodes());
  const std::uint64_t pairs = n * (n - 1) / 2;
  const std::uint64_t free = pairs - g.n_edges(d) - taken.size();
  if (count > free) {
    throw DataError("domain " + std::to_string(d) + " has too few non-edges for a balanced link split");
  }
  std::vector<NodePair> out;
  out.reserve(count);
  if (free < 4 * static_cast<std::uint64_t>(count)) {
    // Dense case: enumerate and shuffle.
    std::vector<NodePair> all;
    for (NodeId a = 0; a < g.n_nodes(); ++a) {
      for (NodeId b = a + 1; b < g.n_nodes(); ++b) {
        if (!g.has_edge(d, a, b) && !taken.contains(key_of(a, b, g.n_nodes()))) all.emplace_back(a, b);
      }
    }
    for (std::size_t k = 0; k < count; ++k) {
      std::swap(all[k], all[k + uniform_index(rng, all.size() - k)]);
      out.push_back(all[k]);
      taken.insert(key_of(all[k].first, all[k].second, g.n_nodes()));
    }
    return out;
  }
  while (out.size() < count) {
    auto a = static_cast<NodeId>(uniform_index(rng, n));
    auto b = static_cast<NodeId>(uniform_index(rng, n));
    if (a == b || g.has_edge(d, a, b)) continue;
    if (a > b) std::swap(a, b);
    if (!taken.insert(key_of(a, b, g.n_nodes())).second) continue;
    out.emplace_back(a, b);
  }
  return out;
}

}  // namespace

LinkEvalSplit make_link_split(const MultiGraph& g, DomainId d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("link split fraction must lie in (0, 1)");
  const auto& edges = g.edges(d);
  const std::size_t e = edges.size();
  if (e < 4) throw DataError("domain " + std::to_string(d) + " needs at least 4 edges for a link split");

  auto n_remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(e) + 0.5));
  n_remove = std::clamp<std::size_t>(n_remove, 1, e - 1);

  Rng rng = make_stream(seed, "link-split", static_cast<std::uint64_t>(d));
  std::vector<std::size_t> order(e);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < n_remove; ++k) std::swap(order[k], order[k + uniform_index(rng, e - k)]);
  std::vector<bool> removed(e, false);
  for (std::size_t k = 0; k < n_remove; ++k) removed[order[k]] = true;

  LinkEvalSplit s;
  s.domain = d;
  s.n_nodes = g.n_nodes();
  MultiGraph kept(g.n_nodes(), 1);
  for (std::size_t k = 0; k < e; ++k) {
    if (removed[k]) {
      s.removed.push_back(edges[k]);
    } else {
      s.retained.push_back(edges[k]);
      kept.add_edge(0, edges[k].i, edges[k].j, edges[k].weight);
    }
  }
  s.retained_digest = kept.domain_digest(0);

  std::unordered_set<std::uint64_t> taken;
  s.train_negatives = sample_non_edges(g, d, s.retained.size(), taken, rng);
  s.test_negatives = sample_non_edges(g, d, s.removed.size(), taken, rng);
  return s;
}

std::vector<LinkEvalSplit> make_link_splits(const MultiGraph& g, double fraction, std::uint64_t seed) {
  std::vector<LinkEvalSplit> out;
  for (int d = 0; d < g.n_domains(); ++d) out.push_back(make_link_split(g, d, fraction, seed));
  return out;
}

MultiGraph retained_graph(const MultiGraph& g, const std::vector<LinkEvalSplit>& splits) {
  std::vector<const LinkEvalSplit*> by_domain(static_cast<std::size_t>(g.n_domains()), nullptr);
  for (const auto& s : splits) {
    if (s.domain < 0 || s.domain >= g.n_domains()) throw std::out_of_range("split domain out of range");
    if (s.n_nodes != g.n_nodes()) throw std::invalid_argument("split was made on a different graph");
    if (by_domain[static_cast<std::size_t>(s.domain)]) throw std::invalid_argument("two splits for one domain");
    by_domain[static_cast<std::size_t>(s.domain)] = &s;
  }
  MultiGraph out(g.n_nodes(), g.n_domains());
  if (g.has_labels()) out.set_node_labels(g.node_labels());
  for (int d = 0; d < g.n_domains(); ++d) {
    const auto* s = by_domain[static_cast<std::size_t>(d)];
    for (const auto& e : s ? s->retained : g.edges(d)) out.add_edge(d, e.i, e.j, e.weight);
  }
  return out;
}

std::string to_string(Combiner c) { return c == Combiner::kAdd ? "add" : "hadamard"; }

Combiner parse_combiner(const std::string& text) {
  if (text == "add") return Combiner::kAdd;
  if (text == "hadamard") return Combiner::kHadamard;
  throw std::invalid_argument("unknown combiner '" + text + "' (expected add or hadamard)");
}

LogisticRegression LogisticRegression::fit(const Matrix& x, const std::vector<int>& y,
                                           const LogisticRegressionConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw std::invalid_argument("logistic regression needs one label per row");
  }
  if (cfg.iterations < 0 || !(cfg.step > 0.0) || cfg.l2 < 0.0) {
    throw std::invalid_argument("bad logistic regression config");
  }
  Vector target(x.rows());
  for (Index k = 0; k < x.rows(); ++k) target(k) = y[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  LogisticRegression m;
  m.weights = Vector::Zero(x.cols());
  for (int it = 0; it < cfg.iterations; ++it) {
    Vector residual = m.predict(x) - target;
    const Vector grad_w = inv_n * (x.transpose() * residual) + cfg.l2 * m.weights;
    const double grad_b = inv_n * residual.sum();
    m.weights -= cfg.step * grad_w;
    m.bias -= cfg.step * grad_b;
  }
  return m;
}

Vector LogisticRegression::predict(const Matrix& x) const {
  Vector z = x * weights;
  for (Index k = 0; k < z.size(); ++k) z(k) = sigmoid(z(k) + bias);
  return z;
}

Matrix pair_features(const Matrix& emb, const std::vector<NodePair>& pairs, Combiner c) {
  Matrix out(static_cast<Index>(pairs.size()), emb.cols());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    if (a < 0 || b < 0 || a >= emb.rows() || b >= emb.rows()) throw std::out_of_range("pair outside embedding rows");
    if (c == Combiner::kAdd) {
      out.row(static_cast<Index>(k)) = emb.row(a) + emb.row(b);
    } else {
      out.row(static_cast<Index>(k)) = emb.row(a).cwiseProduct(emb.row(b));
    }
  }
  return out;
}

double auc_rank_statistic(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k;
    while (end < n && scores[order[end]] == scores[order[k]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t r = k; r < end; ++r) {
      if (labels[order[r]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    k = end;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC needs both positive and negative examples");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double f1_at_threshold(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const bool predicted = scores[k] >= threshold;
    if (predicted && labels[k]) ++tp;
    if (predicted && !labels[k]) ++fp;
    if (!predicted && labels[k]) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

LinkScores link_classify(const LinkEvalSplit& split, const Matrix& emb_d, Combiner combiner,
                         const LogisticRegressionConfig& cfg) {
  if (emb_d.rows() != split.n_nodes) throw std::invalid_argument("embedding rows do not match the split's graph");
  if (split.retained.empty() || split.train_negatives.empty() || split.removed.empty() ||
      split.test_negatives.empty()) {
    throw DataError("link split has a single-class train or test set");
  }
  auto labelled = [](const std::vector<Edge>& pos, const std::vector<NodePair>& neg) {
    std::pair<std::vector<NodePair>, std::vector<int>> out;
    for (const auto& e : pos) {
      out.first.emplace_back(e.i, e.j);
      out.second.push_back(1);
    }
    for (const auto& p : neg) {
      out.first.push_back(p);
      out.second.push_back(0);
    }
    return out;
  };
  const auto [train_pairs, train_y] = labelled(split.retained, split.train_negatives);
  const auto [test_pairs, test_y] = labelled(split.removed, split.test_negatives);
  const auto model = LogisticRegression::fit(pair_features(emb_d, train_pairs, combiner), train_y, cfg);
  const Vector p = model.predict(pair_features(emb_d, test_pairs, combiner));
  const std::vector<double> scores(p.data(), p.data() + p.size());
  return LinkScores{auc_rank_statistic(scores, test_y), f1_at_threshold(scores, test_y, 0.5), combiner};
}

LinkScores link_classify(const LinkEvalSplit& split, const EmbeddingSet& emb, Combiner combiner,
                         const LogisticRegressionConfig& cfg) {
  const auto d = static_cast<std::size_t>(split.domain);
  if (d >= emb.domain.size()) throw std::invalid_argument("embeddings have no block for the split's domain");
  if (d >= emb.trained_on.size() || emb.trained_on[d] != split.retained_digest) {
    throw DataError("embeddings for domain " + std::to_string(split.domain) +
                    " were not trained on the retained graph of this split");
  }
  return link_classify(split, emb.domain[d], combiner, cfg);
}

LinkScores link_classify_best(const LinkEvalSplit& split, const EmbeddingSet& emb,
                              const LogisticRegressionConfig& cfg) {
  const auto add = link_classify(split, emb, Combiner::kAdd, cfg);
  const auto had = link_classify(split, emb, Combiner::kHadamard, cfg);
  return had.auc > add.auc ? had : add;
}

}  // namespace mgembed
