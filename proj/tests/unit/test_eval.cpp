#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "mgembed/error.hpp"
#include "mgembed/eval.hpp"
#include "mgembed/graph_io.hpp"
#include "oracles.hpp"

using namespace mgembed;

namespace {

EmbeddingSet one_domain(Matrix items) {
  EmbeddingSet e;
  e.shared = items;
  e.domain.push_back(std::move(items));
  return e;
}

UserProfile profile(const std::string& user, std::vector<NodeId> train, std::vector<NodeId> test) {
  UserProfile p;
  p.user = user;
  p.train_items = std::move(train);
  p.test_items = std::move(test);
  return p;
}

// Full sort by (cosine desc, index asc), computed from scratch.
std::vector<NodeId> naive_rank(const Vector& u, const Matrix& items, Index n, const std::set<NodeId>& skip) {
  std::vector<std::pair<double, NodeId>> scored;
  for (Index i = 0; i < items.rows(); ++i) {
    if (skip.count(static_cast<NodeId>(i))) continue;
    double dot = 0, nu = 0, ni = 0;
    for (Index c = 0; c < items.cols(); ++c) {
      dot += u(c) * items(i, c);
      nu += u(c) * u(c);
      ni += items(i, c) * items(i, c);
    }
    const double s = (nu == 0 || ni == 0) ? 0.0 : dot / (std::sqrt(nu) * std::sqrt(ni));
    scored.emplace_back(s, static_cast<NodeId>(i));
  }
  std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first > b.first; });
  std::vector<NodeId> out;
  for (std::size_t k = 0; k < scored.size() && static_cast<Index>(k) < n; ++k) out.push_back(scored[k].second);
  return out;
}

MultiGraph labelled_graph(std::vector<std::string> labels) {
  MultiGraph g(static_cast<Index>(labels.size()), 2);
  g.set_node_labels(std::move(labels));
  return g;
}

}  // namespace

TEST(UserEmbeddings, MeanOfTrainItems) {
  Matrix items(3, 2);
  items << 0, 2, 2, 0, 5, 5;
  std::vector<UserProfile> ps{profile("u", {0, 1}, {2}), profile("v", {}, {2})};
  user_embeddings(ps, one_domain(items), 0);
  EXPECT_EQ(ps[0].embedding(0), 1.0);
  EXPECT_EQ(ps[0].embedding(1), 1.0);
  EXPECT_FALSE(ps[0].excluded);
  EXPECT_TRUE(ps[1].excluded);
}

TEST(UserEmbeddings, OnlyTouchesRequestedDomain) {
  EmbeddingSet e = one_domain(Matrix::Identity(2, 2));
  e.domain.push_back(Matrix::Identity(2, 2));
  std::vector<UserProfile> ps{profile("u", {0}, {1})};
  ps[0].domain = 1;
  user_embeddings(ps, e, 0);
  EXPECT_EQ(ps[0].embedding.size(), 0);
  user_embeddings(ps, e, 1);
  EXPECT_EQ(ps[0].embedding.size(), 2);
}

TEST(RankItems, CosineOrderAndTies) {
  Matrix items(4, 2);
  items << 1, 0, 0, 1, 2, 0, 0, 0;
  Vector u(2);
  u << 1, 0;
  EXPECT_EQ(rank_items(u, items, 4), (std::vector<NodeId>{0, 2, 1, 3}));
  EXPECT_EQ(rank_items(u, items, 2, {0}), (std::vector<NodeId>{2, 1}));
  EXPECT_EQ(rank_items(u, items, 10).size(), 4u);
  EXPECT_THROW(rank_items(u, items, 0), std::invalid_argument);
}

TEST(RankItems, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix items = oracle::random_matrix(30, 4, rng);
    // Duplicate rows force exact ties.
    items.row(7) = items.row(3);
    items.row(20) = items.row(3);
    const Vector u = oracle::random_matrix(1, 4, rng).row(0).transpose();
    const std::set<NodeId> skip{static_cast<NodeId>(rng() % 30)};
    const std::unordered_set<NodeId> skip_u(skip.begin(), skip.end());
    const Index n = 1 + static_cast<Index>(rng() % 30);
    EXPECT_EQ(rank_items(u, items, n, skip_u), naive_rank(u, items, n, skip));
  }
}

TEST(RankItems, PositiveRowScalingIsInvisible) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix items = oracle::random_matrix(25, 3, rng);
    Matrix scaled = items;
    for (Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= scale(rng);
    const Vector u = oracle::random_matrix(1, 3, rng).row(0).transpose();
    EXPECT_EQ(rank_items(u, items, 10), rank_items(3.7 * u, scaled, 10));
  }
}

TEST(Metrics, RecallAndMrrExamples) {
  std::vector<UserProfile> ps{profile("a", {9}, {0, 1}), profile("b", {9}, {2, 3})};
  const std::vector<RankedList> r{{"a", 0, {0, 5, 1}}, {"b", 0, {4, 3, 6}}};
  EXPECT_DOUBLE_EQ(recall_at_n(ps, r, 3), 0.75);
  EXPECT_DOUBLE_EQ(recall_at_n(ps, r, 1), 0.25);
  EXPECT_DOUBLE_EQ(mrr_at_n(ps, r, 3), (1.0 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(mrr_at_n(ps, r, 1), 0.5);

  std::vector<UserProfile> one{profile("a", {9}, {7})};
  EXPECT_DOUBLE_EQ(mrr_at_n(one, {{"a", 0, {3, 7}}}, 2), 0.5);
  EXPECT_DOUBLE_EQ(mrr_at_n(one, {{"a", 0, {3, 4}}}, 2), 0.0);
}

TEST(Metrics, ExcludedAndEmptyUsersDoNotCount) {
  std::vector<UserProfile> ps{profile("a", {9}, {0}), profile("b", {9}, {1}), profile("c", {9}, {})};
  ps[1].excluded = true;
  const std::vector<RankedList> r{{"a", 0, {0}}, {"b", 0, {}}, {"c", 0, {5}}};
  EXPECT_DOUBLE_EQ(recall_at_n(ps, r, 1), 1.0);
  EXPECT_DOUBLE_EQ(mrr_at_n(ps, r, 1), 1.0);
}

TEST(Metrics, Errors) {
  std::vector<UserProfile> ps{profile("a", {9}, {})};
  const std::vector<RankedList> r{{"a", 0, {1}}};
  EXPECT_THROW(recall_at_n(ps, r, 1), DataError);
  EXPECT_THROW(mrr_at_n(ps, r, 1), DataError);
  std::vector<UserProfile> ok{profile("a", {9}, {1})};
  EXPECT_THROW(recall_at_n(ok, {{"b", 0, {1}}}, 1), std::invalid_argument);
  EXPECT_THROW(recall_at_n(ok, {}, 1), std::invalid_argument);
}

TEST(Metrics, ThousandRandomTrialsMatchFormula) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<UserProfile> ps;
    std::vector<RankedList> rl;
    const int users = 1 + static_cast<int>(rng() % 5);
    double hits = 0, truth = 0, rr = 0;
    const Index n = 1 + static_cast<Index>(rng() % 6);
    for (int u = 0; u < users; ++u) {
      std::vector<NodeId> perm(20);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<NodeId> test(perm.begin(), perm.begin() + 1 + static_cast<long>(rng() % 4));
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<NodeId> ranked(perm.begin(), perm.begin() + 8);
      ps.push_back(profile("u" + std::to_string(u), {99}, test));
      rl.push_back({"u" + std::to_string(u), 0, ranked});
      truth += static_cast<double>(test.size());
      double first = 0;
      for (Index k = 0; k < n; ++k) {
        const bool hit = std::find(test.begin(), test.end(), ranked[static_cast<std::size_t>(k)]) != test.end();
        hits += hit;
        if (hit && first == 0) first = 1.0 / static_cast<double>(k + 1);
      }
      rr += first;
    }
    EXPECT_NEAR(recall_at_n(ps, rl, n), hits / truth, 1e-15);
    EXPECT_NEAR(mrr_at_n(ps, rl, n), rr / users, 1e-15);
  }
}

TEST(EvaluateRecommendation, MonotoneInNAndBounded) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix items = oracle::random_matrix(200, 5, rng);
    std::vector<UserProfile> ps;
    for (int u = 0; u < 15; ++u) {
      std::vector<NodeId> tr{static_cast<NodeId>(rng() % 200), static_cast<NodeId>(rng() % 200)};
      std::vector<NodeId> te{static_cast<NodeId>(rng() % 200), static_cast<NodeId>(rng() % 200)};
      ps.push_back(profile("u" + std::to_string(u), tr, te));
    }
    const auto m = evaluate_recommendation(ps, one_domain(items), 0, {1, 5, 10, 50, 100, 199, 1000}, trial % 2);
    for (std::size_t k = 0; k < m.grid.size(); ++k) {
      EXPECT_GE(m.recall[k], 0.0);
      EXPECT_LE(m.recall[k], 1.0);
      EXPECT_GE(m.mrr[k], 0.0);
      EXPECT_LE(m.mrr[k], 1.0);
      if (k) {
        EXPECT_GE(m.recall[k], m.recall[k - 1]);
        EXPECT_GE(m.mrr[k], m.mrr[k - 1]);
      }
    }
    if (trial % 2) EXPECT_DOUBLE_EQ(m.recall.back(), 1.0);
  }
}

TEST(EvaluateRecommendation, ToyExample) {
  // u1 trains on a and b; c is the nearest unseen item. u2 trains on d; e is
  // nearest, then a.
  Matrix items(5, 2);
  items << 1, 0, 1, 0.1, 1, -0.1, 0, 1, 0.1, 1;
  std::vector<UserProfile> ps{profile("u1", {0, 1}, {2}), profile("u2", {3}, {4, 2})};
  const auto m = evaluate_recommendation(ps, one_domain(items), 0, {1, 2, 3});
  EXPECT_EQ(m.users, 2u);
  EXPECT_DOUBLE_EQ(m.recall[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.mrr[0], 1.0);
}

TEST(EvaluateRecommendation, ZeroUserVectorIsExcluded) {
  Matrix items(3, 2);
  items << 0, 0, 1, 0, 0, 1;
  std::vector<UserProfile> ps{profile("z", {0}, {1}), profile("ok", {1}, {2})};
  const auto m = evaluate_recommendation(ps, one_domain(items), 0, {2});
  EXPECT_TRUE(ps[0].excluded);
  EXPECT_EQ(m.users, 1u);
  EXPECT_DOUBLE_EQ(m.recall[0], 1.0);
}

TEST(DefaultGrid, Values) {
  EXPECT_EQ(default_topn_grid(), (std::vector<Index>{10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 1000}));
}

TEST(SplitSequences, TemporalCutoff) {
  BehaviorSequences s{2,
                      {{"u1", 0, {"a", "b", "c"}, {0, 9, 10}},
                       {"u2", 0, {"d", "e", "a"}, {1, 9, 10}},
                       {"u1", 1, {"x", "y"}, {2, 7}}}};
  const auto split = split_sequences(s, {0.8, 0});
  EXPECT_TRUE(split.temporal);
  ASSERT_EQ(split.holdouts.size(), 3u);
  EXPECT_EQ(split.holdouts[0].train_items, (std::vector<std::string>{"a"}));
  EXPECT_EQ(split.holdouts[0].test_items, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(split.holdouts[1].train_items, (std::vector<std::string>{"d"}));
  EXPECT_EQ(split.holdouts[2].train_items, (std::vector<std::string>{"x", "y"}));
  EXPECT_TRUE(split.holdouts[2].test_items.empty());
  EXPECT_EQ(split.train.records.size(), 3u);
  EXPECT_EQ(split.train.records[0].timestamps, (std::vector<std::int64_t>{0}));
}

TEST(SplitSequences, RandomSplitCountsAndOrder) {
  BehaviorSequences s{1, {}};
  for (int u = 0; u < 30; ++u) {
    SequenceRecord r{"u" + std::to_string(u), 0, {}, {}};
    for (int k = 0; k < 1 + u % 9; ++k) r.items.push_back("i" + std::to_string(k));
    s.records.push_back(r);
  }
  const auto a = split_sequences(s, {0.7, 5});
  const auto b = split_sequences(s, {0.7, 5});
  EXPECT_FALSE(a.temporal);
  for (std::size_t r = 0; r < s.records.size(); ++r) {
    const auto n = s.records[r].items.size();
    const auto expect = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.7 * n + 0.5)));
    const auto& h = a.holdouts[r];
    EXPECT_EQ(h.train_items.size(), expect);
    EXPECT_EQ(h.train_items.size() + h.test_items.size(), n);
    EXPECT_TRUE(std::is_sorted(h.train_items.begin(), h.train_items.end()));
    EXPECT_EQ(h.train_items, b.holdouts[r].train_items);
  }
  bool differs = false;
  const auto c = split_sequences(s, {0.7, 6});
  for (std::size_t r = 0; r < s.records.size(); ++r) differs |= c.holdouts[r].train_items != a.holdouts[r].train_items;
  EXPECT_TRUE(differs);
  EXPECT_THROW(split_sequences(s, {1.0, 0}), std::invalid_argument);
  EXPECT_THROW(split_sequences(BehaviorSequences{1, {}}, {0.5, 0}), DataError);
}

TEST(SplitSequences, MixedTimestampsFallBackToRandom) {
  BehaviorSequences s{1, {{"u", 0, {"a", "b"}, {1, 2}}, {"v", 0, {"a", "c"}, {}}}};
  EXPECT_FALSE(split_sequences(s, {0.5, 0}).temporal);
  BehaviorSequences flat{1, {{"u", 0, {"a", "b"}, {3, 3}}}};
  EXPECT_FALSE(split_sequences(flat, {0.5, 0}).temporal);
}

TEST(BuildProfiles, DropsUnknownAndTrainItems) {
  RecSplit split;
  split.holdouts.push_back({"u", 0, {"a", "b"}, {"b", "c", "zzz"}});
  ProfileBuildStats stats;
  const auto ps = build_profiles(split, labelled_graph({"a", "b", "c"}), &stats);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].train_items, (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(ps[0].test_items, (std::vector<NodeId>{2}));
  EXPECT_EQ(stats.dropped_unknown_items, 1u);
}

TEST(EmbeddingTsv, RoundTripAndAlign) {
  std::mt19937_64 rng(6);
  const auto g = labelled_graph({"x", "y", "z"});
  EmbeddingSet e{oracle::random_matrix(3, 4, rng), {oracle::random_matrix(3, 2, rng), oracle::random_matrix(3, 2, rng)},
                 {0x1234u, 0xabcdefu}};
  std::stringstream ss;
  write_embeddings(e, g, ss);
  const auto loaded = read_embeddings(ss);
  EXPECT_EQ(loaded.labels, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(loaded.embeddings.shared, e.shared);
  EXPECT_EQ(loaded.embeddings.domain[1], e.domain[1]);
  EXPECT_EQ(loaded.embeddings.trained_on, e.trained_on);

  const auto permuted = labelled_graph({"z", "x", "y"});
  const auto aligned = align_embeddings(loaded, permuted);
  EXPECT_EQ(aligned.domain[0].row(0), e.domain[0].row(2));
  EXPECT_EQ(aligned.shared.row(1), e.shared.row(0));
  EXPECT_THROW(align_embeddings(loaded, labelled_graph({"x", "y", "w"})), DataError);
}

TEST(EmbeddingTsv, MalformedInputReportsLine) {
  std::stringstream ss("# mgembed-embeddings nodes=1 domains=1 shared_dim=1 dim=1\nx\tshared\t1\nx\t0\tabc\n");
  try {
    read_embeddings(ss);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
