#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mgembed/error.hpp"
#include "mgembed/synth.hpp"
#include "mgembed/trainer.hpp"
#include "oracles.hpp"

using namespace mgembed;

namespace {

TrainConfig small_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.dim_shared = 8;
  c.dim_specific = 4;
  c.seed = seed;
  return c;
}

MultiGraph sbm(std::uint64_t seed) {
  SbmConfig s;
  s.seed = seed;
  return make_sbm2(s);
}

void expect_same_params(const ModelParams& a, const ModelParams& b) {
  EXPECT_EQ(a.theta_s, b.theta_s);
  ASSERT_EQ(a.theta_d.size(), b.theta_d.size());
  for (std::size_t d = 0; d < a.theta_d.size(); ++d) EXPECT_EQ(a.theta_d[d], b.theta_d[d]);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mgembed_trainer_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Trainer, RejectsBadSetups) {
  const auto g = sbm(1);
  auto c = small_config();
  c.epochs = 0;
  EXPECT_THROW(Trainer(g, c), std::invalid_argument);

  MultiGraph empty_domain(5, 2);
  empty_domain.add_edge(0, 0, 1, 1.0);
  EXPECT_THROW(Trainer(empty_domain, small_config()), DataError);

  MultiGraph one(1, 1);
  EXPECT_THROW(Trainer(one, small_config()), DataError);

  auto f = small_config();
  set_alpha_mode(f, "fixed:0.5");
  MultiGraph three(6, 3);
  for (int d = 0; d < 3; ++d) three.add_edge(d, 0, d + 1, 1.0);
  EXPECT_THROW(Trainer(three, f), std::invalid_argument);
}

TEST(Trainer, SameSeedIsBitwiseIdentical) {
  const auto g = sbm(2);
  const auto a = train(g, small_config(7));
  const auto b = train(g, small_config(7));
  expect_same_params(a.params, b.params);
  EXPECT_EQ(a.log.rows, b.log.rows);
  EXPECT_EQ(a.embeddings.shared, b.embeddings.shared);
  const auto c = train(g, small_config(8));
  EXPECT_NE(a.params.theta_s, c.params.theta_s);
}

TEST(Trainer, ThreadCountDoesNotChangeResult) {
  const auto g = sbm(2);
  auto c = small_config(3);
  const auto a = train(g, c);
  c.threads = 3;
  const auto b = train(g, c);
  for (std::size_t k = 0; k < a.log.rows.size(); ++k) {
    for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(a.log.rows[k].losses[d], b.log.rows[k].losses[d], 1e-9);
  }
}

TEST(Trainer, LossDecreasesOnBlockGraph) {
  int improved = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = sbm(100 + s);
    auto c = small_config(s);
    c.epochs = 10;
    const auto r = train(g, c);
    const auto first = r.log.mean_epoch_losses(1), last = r.log.mean_epoch_losses(10);
    improved += (last[0] + last[1]) < (first[0] + first[1]);
  }
  EXPECT_GE(improved, 4);
}

TEST(Trainer, StepsPerEpochFollowLargestDomain) {
  MultiGraph g(30, 2);
  for (NodeId j = 1; j < 26; ++j) g.add_edge(0, 0, j, 1.0);
  for (NodeId j = 1; j < 4; ++j) g.add_edge(1, j, j + 1, 1.0);
  auto c = small_config();
  c.batch_size = 10;
  c.epochs = 2;
  Trainer t(g, c);
  EXPECT_EQ(t.steps_per_epoch(), 3u);
  t.run();
  EXPECT_EQ(t.steps_done(), 6);
  EXPECT_EQ(t.log().rows.size(), 6u);
  EXPECT_EQ(t.log().rows[3].epoch, 2);
  EXPECT_THROW(t.run_epoch(), std::logic_error);
}

TEST(Trainer, WeightsStayOnSimplex) {
  const auto g = sbm(4);
  const auto r = train(g, small_config(4));
  for (const auto& row : r.log.rows) {
    ASSERT_EQ(row.alphas.size(), 2u);
    EXPECT_GE(row.alphas[0], 0.0);
    EXPECT_GE(row.alphas[1], 0.0);
    EXPECT_NEAR(row.alphas[0] + row.alphas[1], 1.0, 1e-12);
  }
  MultiGraph three = oracle::random_graph(20, 3, 0.3, 5);
  const auto r3 = train(three, small_config(5));
  for (const auto& row : r3.log.rows) {
    double sum = 0.0;
    for (double a : row.alphas) {
      EXPECT_GE(a, 0.0);
      sum += a;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Trainer, NonFiniteStepAbortsWithLocation) {
  const auto g = sbm(5);
  auto c = small_config();
  c.optimizer = OptimizerMethod::kSgd;
  c.learning_rate = 1e300;
  try {
    train(g, c);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("step"), std::string::npos);
    EXPECT_NE(what.find("epoch"), std::string::npos);
  }
}

TEST(Trainer, SpecificParamsFollowOnlyTheirOwnGradient) {
  const auto g = sbm(6);
  auto c = small_config(6);
  c.optimizer = OptimizerMethod::kSgd;
  c.learning_rate = 0.05;
  Trainer t(g, c);
  int checked = 0;
  t.set_observer([&](const StepTrace& s) {
    for (std::size_t d = 0; d < 2; ++d) {
      const Matrix expected = s.before->theta_d[d] - 0.05 * (*s.bundles)[d].grad_theta_d;
      EXPECT_EQ(s.after->theta_d[d], expected);
    }
    Matrix shared = Matrix::Zero(s.before->theta_s.rows(), s.before->theta_s.cols());
    for (std::size_t d = 0; d < 2; ++d) shared += s.weights->alpha(static_cast<Index>(d)) * (*s.bundles)[d].grad_theta_s;
    EXPECT_LT((s.after->theta_s - (s.before->theta_s - 0.05 * shared)).cwiseAbs().maxCoeff(), 1e-15);
    ++checked;
  });
  t.run();
  EXPECT_EQ(checked, static_cast<int>(t.steps_done()));
}

TEST(Trainer, FixedVertexWeightStillTrainsOtherSpecificLayer) {
  const auto g = sbm(7);
  auto c = small_config(7);
  c.optimizer = OptimizerMethod::kSgd;
  c.learning_rate = 0.05;
  set_alpha_mode(c, "fixed:1.0");
  Trainer t(g, c);
  const Matrix theta2 = t.params().theta_d[1];
  t.set_observer([&](const StepTrace& s) {
    const Matrix expected = s.before->theta_s - 0.05 * (*s.bundles)[0].grad_theta_s;
    EXPECT_EQ(s.after->theta_s, expected);
    EXPECT_EQ(s.weights->alpha(0), 1.0);
  });
  t.run();
  EXPECT_NE(t.params().theta_d[1], theta2);
}

TEST(Trainer, SingleDomainMatchesHandWrittenLoop) {
  MultiGraph g = oracle::random_graph(15, 1, 0.3, 9);
  auto c = small_config(9);
  c.batch_size = 8;
  c.epochs = 2;
  const auto r = train(g, c);

  const auto x0 = FeatureMatrix::identity(15);
  const auto ops = GraphOperators::from_graph(g);
  ModelParams p = init_params(LayerDims{15, 8, 4}, 1, 9);
  auto opt = OptimizerState::create(c.optimizer, c.learning_rate, p);
  NegativeSampler neg(g, 0, c.neg_distribution);
  PositiveSampler pos(g.n_edges(0));
  Rng pos_rng = make_stream(9, "positives", 0), neg_rng = make_stream(9, "negatives", 0);
  Rng drop_rng = make_stream(9, "dropout");
  const std::size_t e = g.n_edges(0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < 2; ++epoch) {
    for (std::size_t k = 0; k * 8 < e; ++k) {
      const auto masks = draw_dropout_masks(x0, 8, 1, c.dropout, drop_rng);
      const auto pass = forward_pass(ops, x0, p, &masks);
      const auto batch = make_batch(g, 0, pos.next(std::min<std::size_t>(8, e - k * 8), pos_rng), 2, neg, neg_rng);
      const auto grad = backward(batch, ops, x0, p, pass, &masks);
      EXPECT_EQ(grad.loss, r.log.rows[step].losses[0]);
      apply_updates(p, {grad}, DomainWeights::uniform(1), opt);
      ++step;
    }
  }
  EXPECT_EQ(step, r.log.rows.size());
  expect_same_params(p, r.params);
}

TEST(Trainer, EmbeddingsCarryGraphDigests) {
  const auto g = sbm(8);
  Trainer t(g, small_config());
  t.run();
  const auto emb = t.embeddings();
  ASSERT_EQ(emb.trained_on.size(), 2u);
  EXPECT_EQ(emb.trained_on[0], g.domain_digest(0));
  EXPECT_EQ(emb.trained_on[1], g.domain_digest(1));
  EXPECT_EQ(emb.shared.rows(), g.n_nodes());
  EXPECT_EQ(emb.domain[1].cols(), 4);
  // Evaluation-mode embeddings are deterministic.
  EXPECT_EQ(t.embeddings().domain[0], emb.domain[0]);
}

TEST(TrainLog, CsvAndSummary) {
  const auto g = sbm(9);
  const auto r = train(g, small_config());
  std::ostringstream os;
  r.log.write_csv(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "step,epoch,loss_1,loss_2,alpha_1,alpha_2");
  std::size_t lines = 0;
  for (std::string line; std::getline(is, line);) ++lines;
  EXPECT_EQ(lines, r.log.rows.size());

  const auto js = r.log.summary_json();
  for (const char* key : {"final_losses", "mean_alpha", "wall_time_seconds", "steps", "epochs"}) {
    EXPECT_NE(js.find('"' + std::string(key) + '"'), std::string::npos) << key;
  }
  EXPECT_THROW(r.log.mean_epoch_losses(99), std::out_of_range);
}

TEST(Checkpoint, JsonRoundTrip) {
  const auto g = sbm(10);
  Trainer t(g, small_config(10));
  t.run_epoch();
  const auto c = t.checkpoint();
  const auto back = checkpoint_from_json(checkpoint_to_json(c));
  EXPECT_EQ(back.config, c.config);
  expect_same_params(back.params, c.params);
  EXPECT_EQ(back.optimizer.shared.first, c.optimizer.shared.first);
  EXPECT_EQ(back.optimizer.shared.second, c.optimizer.shared.second);
  EXPECT_EQ(back.optimizer.shared.steps, c.optimizer.shared.steps);
  EXPECT_EQ(back.positive_rng_states, c.positive_rng_states);
  EXPECT_EQ(back.dropout_rng_state, c.dropout_rng_state);
  EXPECT_EQ(back.positive_orders, c.positive_orders);
  EXPECT_EQ(back.last_alpha, c.last_alpha);
  EXPECT_EQ(back.log.rows, c.log.rows);
  EXPECT_EQ(back.graph_digests, c.graph_digests);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto g = sbm(11);
  auto c = small_config(11);
  c.epochs = 10;
  Trainer full(g, c);
  full.run();

  Trainer first(g, c);
  for (int e = 0; e < 5; ++e) first.run_epoch();
  const auto path = temp_file("resume.json");
  save_checkpoint(first.checkpoint(), path);
  Trainer second = Trainer::resume(g, load_checkpoint(path));
  std::filesystem::remove(path);
  EXPECT_EQ(second.epochs_done(), 5);
  second.run();
  expect_same_params(second.params(), full.params());
  EXPECT_EQ(second.log().rows, full.log().rows);
}

TEST(Checkpoint, RejectsBadFiles) {
  const auto g = sbm(12);
  Trainer t(g, small_config(12));
  t.run_epoch();
  const auto json = checkpoint_to_json(t.checkpoint());

  const auto path = temp_file("bad.json");
  {
    std::ofstream f(path);
    f << json.substr(0, json.size() / 2);
  }
  EXPECT_THROW(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), DataError);

  std::string wrong = json;
  const auto at = wrong.find("\"version\"");
  ASSERT_NE(at, std::string::npos);
  const auto colon = wrong.find(':', at);
  wrong.replace(colon + 1, wrong.find_first_of(",\n}", colon) - colon - 1, " 99");
  EXPECT_THROW(checkpoint_from_json(wrong), DataError);

  const auto other = sbm(13);
  EXPECT_THROW(Trainer::resume(other, checkpoint_from_json(json)), DataError);
}
