#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgembed/gcn.hpp"
#include "mgembed/multigraph.hpp"
#include "mgembed/types.hpp"

namespace mgembed {

using NodePair = std::pair<NodeId, NodeId>;

// Held-out link prediction data for one domain. Removed edges are the test
// positives, retained edges the train positives; each positive set is paired
// with an equal number of non-edges of the original domain.
struct LinkEvalSplit {
  DomainId domain = 0;
  Index n_nodes = 0;
  std::vector<Edge> retained;
  std::vector<Edge> removed;
  std::vector<NodePair> train_negatives;
  std::vector<NodePair> test_negatives;
  // domain_digest of the retained edge set; compared against an
  // EmbeddingSet's trained_on tag.
  std::uint64_t retained_digest = 0;
};

// Removes round(fraction * E_d) edges (halves round up, at least one edge is
// removed and one kept). Needs E_d >= 4; fraction must lie in (0, 1).
LinkEvalSplit make_link_split(const MultiGraph& g, DomainId d, double fraction, std::uint64_t seed);

// One split per domain, each drawn from its own seed stream.
std::vector<LinkEvalSplit> make_link_splits(const MultiGraph& g, double fraction, std::uint64_t seed);

// The graph with every split's domain reduced to its retained edges.
MultiGraph retained_graph(const MultiGraph& g, const std::vector<LinkEvalSplit>& splits);

enum class Combiner { kAdd, kHadamard };

std::string to_string(Combiner c);
Combiner parse_combiner(const std::string& text);

struct LogisticRegressionConfig {
  int iterations = 500;
  double step = 0.1;
  double l2 = 1e-4;
};

struct LinkScores {
  double auc = 0.0;
  double f1 = 0.0;
  Combiner combiner = Combiner::kAdd;
};

// Logistic regression with a bias term, fitted by full-batch gradient descent
// on the mean log loss plus (l2/2)||w||^2.
struct LogisticRegression {
  Vector weights;
  double bias = 0.0;

  static LogisticRegression fit(const Matrix& x, const std::vector<int>& y, const LogisticRegressionConfig& cfg);
  Vector predict(const Matrix& x) const;
};

Matrix pair_features(const Matrix& emb, const std::vector<NodePair>& pairs, Combiner c);

// Mann-Whitney statistic with average ranks, so ties earn half credit.
// Throws DataError unless both classes are present.
double auc_rank_statistic(const std::vector<double>& scores, const std::vector<int>& labels);

// F1 of the positive class for predictions score >= threshold; 0 when there
// are no true positives.
double f1_at_threshold(const std::vector<double>& scores, const std::vector<int>& labels, double threshold = 0.5);

// Trains on retained edges plus train negatives, scores removed edges plus
// test negatives.
LinkScores link_classify(const LinkEvalSplit& split, const Matrix& emb_d, Combiner combiner,
                         const LogisticRegressionConfig& cfg = {});

// Same, after checking that emb was trained on this split's retained graph.
LinkScores link_classify(const LinkEvalSplit& split, const EmbeddingSet& emb, Combiner combiner,
                         const LogisticRegressionConfig& cfg = {});

// Evaluates both combiners and returns the one with the higher AUC (add wins
// ties).
LinkScores link_classify_best(const LinkEvalSplit& split, const EmbeddingSet& emb,
                              const LogisticRegressionConfig& cfg = {});

}  // namespace mgembed
