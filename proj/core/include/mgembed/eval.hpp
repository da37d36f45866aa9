#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "mgembed/gcn.hpp"
#include "mgembed/multigraph.hpp"
#include "mgembed/types.hpp"

namespace mgembed {

// One user's interactions in one domain, split into train and held-out test
// items, plus the averaged user vector once computed.
struct UserProfile {
  std::string user;
  DomainId domain = 0;
  std::vector<NodeId> train_items;
  std::vector<NodeId> test_items;
  Vector embedding;
  bool excluded = false;
};

struct RankedList {
  std::string user;
  DomainId domain = 0;
  std::vector<NodeId> items;
};

// Sets each domain-d profile's embedding to the mean of its train items'
// rows in emb.domain[d]. Profiles with no train items are marked excluded.
void user_embeddings(std::vector<UserProfile>& profiles, const EmbeddingSet& emb, DomainId d);

// Top-n items by cosine similarity to `user` (descending, ties by ascending
// node index), skipping `exclude`. Items with zero norm score 0. Throws if
// n <= 0.
std::vector<NodeId> rank_items(const Vector& user, const Matrix& items, Index top_n,
                               const std::unordered_set<NodeId>& exclude = {});

// Ranks every non-excluded profile of domain d. Profiles whose vector is zero
// are marked excluded and get an empty list. Train items are skipped unless
// include_train is set.
std::vector<RankedList> rank_profiles(std::vector<UserProfile>& profiles, const EmbeddingSet& emb, DomainId d,
                                      Index top_n, bool include_train = false);

// sum_u |R_u[:n] ∩ T_u| / sum_u |T_u| over non-excluded profiles with test
// items; `ranked` is aligned with `profiles`. Throws DataError when there is
// no ground truth.
double recall_at_n(const std::vector<UserProfile>& profiles, const std::vector<RankedList>& ranked, Index n);

// Mean over the same users of 1 / (rank of the first hit in R_u[:n]); users
// without a hit contribute 0. Throws DataError for an empty user set.
double mrr_at_n(const std::vector<UserProfile>& profiles, const std::vector<RankedList>& ranked, Index n);

// {10, 20, ..., 100, 1000}.
std::vector<Index> default_topn_grid();

struct RecSplitConfig {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct RecSplit {
  BehaviorSequences train;
  // Per (user, domain) held-out items, as raw item ids.
  struct Holdout {
    std::string user;
    DomainId domain = 0;
    std::vector<std::string> train_items;
    std::vector<std::string> test_items;
  };
  std::vector<Holdout> holdouts;
  bool temporal = false;
};

// Splits sequences into train and test events. When every record carries
// timestamps the split is temporal: events before
// t_min + train_fraction * (t_max - t_min) train, the rest test. Otherwise
// each (user, domain) keeps a random round(train_fraction * n) of its events
// (at least one) for training, in original order.
RecSplit split_sequences(const BehaviorSequences& seqs, const RecSplitConfig& cfg);

struct ProfileBuildStats {
  std::size_t dropped_unknown_items = 0;
};

// Resolves a split's items against a graph vocabulary. Test items that are
// also train items of the same user are dropped from the ground truth, as are
// items unknown to the vocabulary (counted in stats).
std::vector<UserProfile> build_profiles(const RecSplit& split, const MultiGraph& vocabulary,
                                        ProfileBuildStats* stats = nullptr);

struct RecMetrics {
  DomainId domain = 0;
  std::size_t users = 0;
  std::vector<Index> grid;
  std::vector<double> recall;
  std::vector<double> mrr;
};

// Ranks once at the largest n of the grid and evaluates every prefix.
RecMetrics evaluate_recommendation(std::vector<UserProfile>& profiles, const EmbeddingSet& emb, DomainId d,
                                   const std::vector<Index>& grid, bool include_train = false);

// Embedding TSV: `<label>\t<domain>\t<values...>` per row, the shared block
// tagged `shared`. Header comments carry the shape and provenance.
void write_embeddings(const EmbeddingSet& emb, const MultiGraph& g, std::ostream& os);

struct LoadedEmbeddings {
  EmbeddingSet embeddings;
  std::vector<std::string> labels;
};

LoadedEmbeddings read_embeddings(std::istream& is, const std::string& source = "<embeddings>");

// Re-indexes loaded rows to a graph's node order; every node must be present.
EmbeddingSet align_embeddings(const LoadedEmbeddings& loaded, const MultiGraph& g);

}  // namespace mgembed
