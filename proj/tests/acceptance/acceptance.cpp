// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mgembed/error.hpp"
#include "mgembed/eval.hpp"
#include "mgembed/link_eval.hpp"
#include "mgembed/mgda.hpp"
#include "mgembed/objective.hpp"
#include "mgembed/synth.hpp"
#include "mgembed/trainer.hpp"
#include "oracles.hpp"

using namespace mgembed;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Line {
  int id;
  bool ok;
  std::string text;
};
std::vector<Line> lines;

void report(int id, const char* name, bool ok, const std::string& detail) {
  lines.push_back({id, ok, std::string(ok ? "PASS " : "FAIL ") + std::to_string(id) + " " + name + ": " + detail});
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double max_rel_error(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    const double x = a.data()[k], y = b.data()[k];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
  }
  return worst;
}

void gradient_correctness() {
  const auto start = Clock::now();
  double worst = 0.0;
  int seeds = 0;
  for (std::uint64_t seed = 0; seeds < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Index n = 4 + static_cast<Index>(seed % 7);
    const auto g = oracle::random_graph(n, 2, 0.35, rng());
    if (g.n_edges(0) == 0 || g.n_edges(1) == 0) continue;
    const auto x0 = FeatureMatrix::identity(n);
    const auto p = init_params(LayerDims{n, 5, 3}, 2, seed);
    Rng srng(seed);
    try {
      for (int d = 0; d < 2; ++d) {
        const auto b = sample_batch(g, d, 8, 2, srng, NegativeDistribution::kUniform);
        const auto an = backward(b, g, x0, p);
        const auto fd = finite_diff_grad(b, g, x0, p, 1e-5);
        worst = std::max({worst, max_rel_error(an.grad_theta_s, fd.grad_theta_s),
                          max_rel_error(an.grad_theta_d, fd.grad_theta_d)});
      }
    } catch (const SaturationError&) {
      continue;
    }
    ++seeds;
  }
  const double t = seconds_since(start);
  report(1, "gradient-correctness", worst < 1e-4 && t < 10.0,
         fmt("%.0f seeds, max relative error %.2e, %.2fs", seeds, worst, t));
}

void mgda_solver() {
  std::mt19937_64 rng(11);
  double grid_gap = 0.0, value_gap = 0.0, beaten_by_grid = 0.0, fw2_gap = 0.0, vertex_excess = -1e300;
  bool dominance = true;
  for (int inst = 0; inst < 100; ++inst) {
    const Matrix u = oracle::random_matrix(4, 3, rng, 1.0 + inst % 3);
    const Matrix v = oracle::random_matrix(4, 3, rng);
    const double a = solve_alpha_2(u, v);
    // Brute force over 10^5 grid points.
    double best_a = 0.0, best_f = 1e300;
    for (int k = 0; k < 100000; ++k) {
      const double t = k / 99999.0;
      const double f = (t * u + (1 - t) * v).squaredNorm();
      if (f < best_f) {
        best_f = f;
        best_a = t;
      }
    }
    const double f_a = (a * u + (1 - a) * v).squaredNorm();
    grid_gap = std::max(grid_gap, std::abs(a - best_a));
    value_gap = std::max(value_gap, std::abs(f_a - best_f));
    beaten_by_grid = std::max(beaten_by_grid, f_a - best_f);
    const double combined = std::sqrt(f_a);
    dominance = dominance && combined <= std::min(u.norm(), v.norm()) + 1e-12;

    const auto w2 = solve_alpha_fw({u, v}, 1000, 0.0);
    fw2_gap = std::max(fw2_gap, std::abs(w2.alpha(0) - a));

    const std::vector<Matrix> three{u, v, oracle::random_matrix(4, 3, rng)};
    const auto w3 = solve_alpha_fw(three);
    const double obj = min_norm_objective(three, w3);
    double smallest_vertex = 1e300;
    for (const auto& g : three) smallest_vertex = std::min(smallest_vertex, g.squaredNorm());
    vertex_excess = std::max(vertex_excess, obj - smallest_vertex);
  }
  const bool ok = value_gap < 1e-6 && beaten_by_grid <= 1e-12 && fw2_gap < 1e-6 && dominance && vertex_excess <= 0.0;
  report(2, "mgda-solver", ok,
         fmt("objective vs grid max %.2e (alpha gap %.2e at grid step 1e-5), FW-vs-closed max %.2e, ", value_gap,
             grid_gap, fw2_gap) +
             "min-norm dominance " + (dominance ? "held" : "violated") +
             fmt(", D=3 FW objective minus smallest vertex objective max %.2e", vertex_excess));
}

void descent_property() {
  std::mt19937_64 rng(12);
  int eligible = 0, decreased = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 6;
    auto spd = [&] {
      const Matrix m = oracle::random_matrix(n, n, rng);
      return Matrix(m.transpose() * m + 0.1 * Matrix::Identity(n, n));
    };
    const Matrix a = spd(), b = spd();
    const Vector ca = oracle::random_matrix(n, 1, rng, 2.0).col(0), cb = oracle::random_matrix(n, 1, rng, 2.0).col(0);
    const Vector x = oracle::random_matrix(n, 1, rng, 2.0).col(0);
    auto f1 = [&](const Vector& y) { return 0.5 * (y - ca).dot(a * (y - ca)); };
    auto f2 = [&](const Vector& y) { return 0.5 * (y - cb).dot(b * (y - cb)); };
    const Matrix g1 = a * (x - ca), g2 = b * (x - cb);
    const double alpha = solve_alpha_2(g1, g2);
    const Matrix dir = alpha * g1 + (1 - alpha) * g2;
    if (dir.norm() <= 1e-6) continue;
    ++eligible;
    Matrix y = x;
    OptimizerState st;
    st.method = OptimizerMethod::kSgd;
    st.learning_rate = 1e-3;
    AdamMoments unused;
    optimizer_step(y, dir, unused, st);
    decreased += f1(y.col(0)) < f1(x) && f2(y.col(0)) < f2(x);
  }
  report(3, "descent-property", decreased * 100 >= 99 * eligible && eligible > 0,
         fmt("%.0f of %.0f eligible trials decreased both objectives", decreased, eligible));
}

struct SbmRun {
  std::vector<double> auc;            // per domain, trained
  std::vector<double> untrained_auc;  // per domain
  std::vector<std::vector<double>> epoch_alpha;  // per epoch, mean weight of domain 1
};

SbmRun sbm_run(std::uint64_t seed, const std::string& alpha) {
  SbmConfig sc;
  sc.seed = 100 + seed;
  const auto g = make_sbm2(sc);
  const auto splits = make_link_splits(g, 0.3, seed);
  const auto retained = retained_graph(g, splits);
  TrainConfig cfg;
  cfg.seed = seed;
  set_alpha_mode(cfg, alpha);
  Trainer t(retained, cfg);
  const auto before = t.embeddings();
  t.run();
  const auto after = t.embeddings();
  SbmRun r;
  for (int d = 0; d < 2; ++d) {
    r.untrained_auc.push_back(link_classify_best(splits[static_cast<std::size_t>(d)], before).auc);
    r.auc.push_back(link_classify_best(splits[static_cast<std::size_t>(d)], after).auc);
  }
  for (int e = 1; e <= cfg.epochs; ++e) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : t.log().rows) {
      if (row.epoch == e) {
        sum += row.alphas[0];
        ++n;
      }
    }
    r.epoch_alpha.push_back({sum / n});
  }
  return r;
}

void sbm_criteria() {
  const auto start = Clock::now();
  std::vector<SbmRun> mgda, fixed1, fixed0;
  for (std::uint64_t s = 0; s < 5; ++s) mgda.push_back(sbm_run(s, "mgda"));
  const double t_mgda = seconds_since(start);
  for (std::uint64_t s = 0; s < 5; ++s) {
    fixed1.push_back(sbm_run(s, "fixed:1.0"));
    fixed0.push_back(sbm_run(s, "fixed:0.0"));
  }

  int good = 0;
  double trained_mean = 0.0, untrained_mean = 0.0, worst = 1.0;
  for (const auto& r : mgda) {
    good += r.auc[0] >= 0.80 && r.auc[1] >= 0.80;
    for (int d = 0; d < 2; ++d) {
      trained_mean += r.auc[static_cast<std::size_t>(d)] / 10.0;
      untrained_mean += r.untrained_auc[static_cast<std::size_t>(d)] / 10.0;
      worst = std::min(worst, r.auc[static_cast<std::size_t>(d)]);
    }
  }
  report(4, "end-to-end-learning", good >= 4 && t_mgda < 120.0 && trained_mean > untrained_mean,
         fmt("%.0f/5 seeds with AUC >= 0.80 in both domains (min %.3f, mean %.3f); untrained mean %.3f", good, worst,
             trained_mean, untrained_mean) +
             fmt(", %.1fs", t_mgda));

  auto mean_auc = [](const std::vector<SbmRun>& runs) {
    double s = 0.0;
    for (const auto& r : runs) s += (r.auc[0] + r.auc[1]) / 2.0;
    return s / static_cast<double>(runs.size());
  };
  const double m = mean_auc(mgda), f1 = mean_auc(fixed1), f0 = mean_auc(fixed0);
  report(5, "cross-domain-benefit", m >= f1 - 0.02 && m >= f0 - 0.02,
         fmt("mean AUC mgda %.3f, fixed:1.0 %.3f, fixed:0.0 %.3f", m, f1, f0));

  bool interior = true;
  double lo = 1.0, hi = 0.0, overall = 0.0;
  int count = 0;
  for (const auto& r : mgda) {
    for (const auto& e : r.epoch_alpha) {
      interior = interior && e[0] > 0.0 && e[0] < 1.0;
      lo = std::min(lo, e[0]);
      hi = std::max(hi, e[0]);
      overall += e[0];
      ++count;
    }
  }
  report(8, "interior-alpha", interior,
         fmt("per-epoch mean alpha_1 in [%.4f, %.4f], overall %.4f", lo, hi, overall / count));
}

void metric_exactness() {
  std::mt19937_64 rng(13);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int users = 1 + static_cast<int>(rng() % 30);
    const Index n = 1 + static_cast<Index>(rng() % 10);
    std::vector<UserProfile> ps;
    std::vector<RankedList> rl;
    std::size_t hits = 0, truth = 0;
    double rr = 0.0;
    for (int u = 0; u < users; ++u) {
      std::vector<NodeId> pool(40);
      std::iota(pool.begin(), pool.end(), 0);
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<NodeId> test(pool.begin(), pool.begin() + 1 + static_cast<long>(rng() % 5));
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<NodeId> ranked(pool.begin(), pool.begin() + 12);
      UserProfile p;
      p.user = "u" + std::to_string(u);
      p.train_items = {99};
      p.test_items = test;
      ps.push_back(p);
      rl.push_back({p.user, 0, ranked});
      truth += test.size();
      double first = 0.0;
      for (Index k = 0; k < n; ++k) {
        const bool hit = std::find(test.begin(), test.end(), ranked[static_cast<std::size_t>(k)]) != test.end();
        hits += hit;
        if (hit && first == 0.0) first = 1.0 / static_cast<double>(k + 1);
      }
      rr += first;
    }
    mismatches += recall_at_n(ps, rl, n) != static_cast<double>(hits) / static_cast<double>(truth);
    mismatches += mrr_at_n(ps, rl, n) != rr / users;

    const int pairs = 2 + static_cast<int>(rng() % 29);
    std::vector<double> s;
    std::vector<int> y;
    for (int k = 0; k < pairs; ++k) {
      s.push_back(static_cast<double>(rng() % 8) / 7.0);
      y.push_back(k < 1 ? 1 : k < 2 ? 0 : static_cast<int>(rng() % 2));
    }
    mismatches += auc_rank_statistic(s, y) != oracle::auc_pairs(s, y);
  }
  report(6, "metric-exactness", mismatches == 0, fmt("%.0f mismatches over 1000 trials", mismatches));
}

void reductions() {
  const auto g = oracle::random_graph(15, 1, 0.3, 21);
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.dim_shared = 8;
  c.dim_specific = 4;
  c.seed = 21;
  const auto r = train(g, c);

  const auto x0 = FeatureMatrix::identity(15);
  const auto ops = GraphOperators::from_graph(g);
  ModelParams p = init_params(LayerDims{15, 8, 4}, 1, 21);
  auto opt = OptimizerState::create(c.optimizer, c.learning_rate, p);
  NegativeSampler neg(g, 0, c.neg_distribution);
  PositiveSampler pos(g.n_edges(0));
  Rng pos_rng = make_stream(21, "positives", 0), neg_rng = make_stream(21, "negatives", 0);
  Rng drop_rng = make_stream(21, "dropout");
  const std::size_t e = g.n_edges(0);
  bool same = true;
  std::size_t step = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    for (std::size_t k = 0; k * c.batch_size < e; ++k) {
      const auto masks = draw_dropout_masks(x0, 8, 1, c.dropout, drop_rng);
      const auto pass = forward_pass(ops, x0, p, &masks);
      const auto batch =
          make_batch(g, 0, pos.next(std::min(c.batch_size, e - k * c.batch_size), pos_rng), c.negatives, neg, neg_rng);
      const auto grad = backward(batch, ops, x0, p, pass, &masks);
      same = same && step < r.log.rows.size() && grad.loss == r.log.rows[step].losses[0];
      apply_updates(p, {grad}, DomainWeights::uniform(1), opt);
      ++step;
    }
  }
  same = same && step == r.log.rows.size() && p.theta_s == r.params.theta_s && p.theta_d[0] == r.params.theta_d[0];

  Rng unused(0);
  const auto a = forward_all(g, x0, r.params, false, unused);
  const auto b = forward_all(g, x0, r.params, false, unused);
  const bool deterministic = a.shared == b.shared && a.domain[0] == b.domain[0];
  report(7, "reductions", same && deterministic,
         std::string("single-domain trajectory ") + (same ? "bitwise equal" : "differs") +
             fmt(" over %.0f steps; eval forward ", static_cast<double>(step)) +
             (deterministic ? "deterministic" : "non-deterministic"));
}

}  // namespace

int main() {
  gradient_correctness();
  mgda_solver();
  descent_property();
  sbm_criteria();
  metric_exactness();
  reductions();
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& l : lines) {
    std::printf("%s\n", l.text.c_str());
    failures += !l.ok;
  }
  return failures == 0 ? 0 : 1;
}
