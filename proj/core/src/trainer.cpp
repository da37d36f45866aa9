#include "mgembed/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mgembed/error.hpp"
#include "mgembed/graph_io.hpp"
#include "parallel.hpp"

namespace mgembed {

std::vector<double> TrainLog::mean_epoch_losses(int epoch) const {
  std::vector<double> sum(static_cast<std::size_t>(n_domains), 0.0);
  std::size_t count = 0;
  for (const auto& row : rows) {
    if (row.epoch != epoch) continue;
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += row.losses[d];
    ++count;
  }
  if (count == 0) throw std::out_of_range("no log rows for epoch " + std::to_string(epoch));
  for (auto& s : sum) s /= static_cast<double>(count);
  return sum;
}

std::vector<double> TrainLog::mean_alphas() const {
  std::vector<double> sum(static_cast<std::size_t>(n_domains), 0.0);
  if (rows.empty()) return sum;
  for (const auto& row : rows) {
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += row.alphas[d];
  }
  for (auto& s : sum) s /= static_cast<double>(rows.size());
  return sum;
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "step,epoch";
  for (int d = 1; d <= n_domains; ++d) os << ",loss_" << d;
  for (int d = 1; d <= n_domains; ++d) os << ",alpha_" << d;
  os << '\n';
  for (const auto& row : rows) {
    os << row.step << ',' << row.epoch;
    for (double l : row.losses) os << ',' << format_double(l);
    for (double a : row.alphas) os << ',' << format_double(a);
    os << '\n';
  }
}

std::string TrainLog::summary_json() const {
  std::ostringstream os;
  auto list = [&os](const std::vector<double>& v) {
    os << '[';
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? ", " : "") << format_double(v[k]);
    os << ']';
  };
  os << "{\n  \"final_losses\": ";
  list(rows.empty() ? std::vector<double>(static_cast<std::size_t>(n_domains), 0.0) : rows.back().losses);
  os << ",\n  \"mean_alpha\": ";
  list(mean_alphas());
  os << ",\n  \"wall_time_seconds\": " << format_double(wall_time_seconds)
     << ",\n  \"steps\": " << rows.size()
     << ",\n  \"epochs\": " << (rows.empty() ? 0 : rows.back().epoch) << "\n}\n";
  return os.str();
}

Trainer::Trainer(const MultiGraph& g, TrainConfig cfg) : Trainer(g, cfg, FeatureMatrix::identity(std::max<Index>(g.n_nodes(), 1))) {}

Trainer::Trainer(const MultiGraph& g, TrainConfig cfg, FeatureMatrix features)
    : graph_(&g), cfg_(std::move(cfg)), features_(std::move(features)) {
  cfg_.validate();
  const int n_domains = g.n_domains();
  if (g.n_nodes() < 2) throw DataError("training needs at least two nodes");
  for (int d = 0; d < n_domains; ++d) {
    if (g.n_edges(d) == 0) throw DataError("domain " + std::to_string(d) + " has no edges");
  }
  if (cfg_.alpha_mode == AlphaMode::kFixed && n_domains != 2) {
    throw std::invalid_argument("fixed alpha weighting is defined for exactly two domains");
  }
  if (features_.rows() != g.n_nodes()) throw std::invalid_argument("feature rows do not match node count");

  ops_ = GraphOperators::from_graph(g);
  params_ = init_params(LayerDims{features_.cols(), cfg_.dim_shared, cfg_.dim_specific}, n_domains, cfg_.seed);
  optimizer_ = OptimizerState::create(cfg_.optimizer, cfg_.learning_rate, params_);
  for (int d = 0; d < n_domains; ++d) {
    negative_samplers_.emplace_back(g, d, cfg_.neg_distribution);
    positive_samplers_.emplace_back(g.n_edges(d));
    positive_rngs_.push_back(make_stream(cfg_.seed, "positives", static_cast<std::uint64_t>(d)));
    negative_rngs_.push_back(make_stream(cfg_.seed, "negatives", static_cast<std::uint64_t>(d)));
  }
  dropout_rng_ = make_stream(cfg_.seed, "dropout");
  last_weights_ = cfg_.alpha_mode == AlphaMode::kFixed ? fixed_alpha_weights(cfg_.fixed_alpha)
                                                        : DomainWeights::uniform(n_domains);
  const std::size_t largest = g.max_domain_edges();
  steps_per_epoch_ = (largest + cfg_.batch_size - 1) / cfg_.batch_size;
  log_.n_domains = n_domains;
}

void Trainer::run_epoch() {
  if (finished()) throw std::logic_error("training already finished");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t largest = graph_->max_domain_edges();
  for (std::size_t k = 0; k < steps_per_epoch_; ++k) {
    step(std::min(cfg_.batch_size, largest - k * cfg_.batch_size));
  }
  ++epoch_;
  log_.wall_time_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void Trainer::run() {
  while (!finished()) run_epoch();
}

void Trainer::step(std::size_t count) {
  const int n_domains = graph_->n_domains();
  const auto masks = draw_dropout_masks(features_, params_.theta_s.cols(), n_domains, cfg_.dropout, dropout_rng_);
  const auto pass = forward_pass(ops_, features_, params_, &masks, cfg_.threads);

  std::vector<SampleBatch> batches;
  batches.reserve(static_cast<std::size_t>(n_domains));
  for (int d = 0; d < n_domains; ++d) {
    const auto u = static_cast<std::size_t>(d);
    const auto take = std::min(count, graph_->n_edges(d));
    const auto idx = positive_samplers_[u].next(take, positive_rngs_[u]);
    batches.push_back(make_batch(*graph_, d, idx, cfg_.negatives, negative_samplers_[u], negative_rngs_[u]));
  }

  std::vector<GradientBundle> bundles(static_cast<std::size_t>(n_domains));
  parallel_for(bundles.size(), cfg_.threads, [&](std::size_t d) {
    bundles[d] = backward(batches[d], ops_, features_, params_, pass, &masks);
  });
  for (const auto& b : bundles) {
    if (!std::isfinite(b.loss) || !b.grad_theta_s.allFinite() || !b.grad_theta_d.allFinite()) {
      throw NumericalError("non-finite loss or gradient at step " + std::to_string(step_ + 1) + " (epoch " +
                           std::to_string(epoch_ + 1) + ") in domain " + std::to_string(b.domain + 1));
    }
  }

  DomainWeights weights = last_weights_;
  if (cfg_.alpha_mode == AlphaMode::kFixed) {
    weights = fixed_alpha_weights(cfg_.fixed_alpha);
  } else if (n_domains == 1) {
    weights = DomainWeights::uniform(1);
  } else {
    std::vector<Matrix> normalized;
    bool degenerate = false;
    for (const auto& b : bundles) {
      auto n = normalize_gradient(b.grad_theta_s, b.loss);
      degenerate = degenerate || n.degenerate;
      normalized.push_back(std::move(n.value));
    }
    // A degenerate domain keeps the previous step's weights.
    if (!degenerate) {
      if (n_domains == 2) {
        weights = fixed_alpha_weights(solve_alpha_2(normalized[0], normalized[1]));
      } else {
        weights = solve_alpha_fw(normalized, cfg_.fw_iterations, cfg_.fw_tolerance);
      }
    }
  }

  ModelParams before;
  if (observer_) before = params_;
  apply_updates(params_, bundles, weights, optimizer_, cfg_.shared_step);
  if (!params_.all_finite()) {
    throw NumericalError("parameters became non-finite at step " + std::to_string(step_ + 1) + " (epoch " +
                         std::to_string(epoch_ + 1) + ")");
  }

  ++step_;
  TrainLogRow row;
  row.step = step_;
  row.epoch = epoch_ + 1;
  for (const auto& b : bundles) row.losses.push_back(b.loss);
  row.alphas.assign(weights.alpha.data(), weights.alpha.data() + weights.alpha.size());
  log_.rows.push_back(std::move(row));
  last_weights_ = weights;

  if (observer_) observer_(StepTrace{step_, epoch_ + 1, &before, &params_, &bundles, &weights});
}

EmbeddingSet Trainer::embeddings() const {
  EmbeddingSet emb = to_embeddings(forward_pass(ops_, features_, params_, nullptr, cfg_.threads));
  for (int d = 0; d < graph_->n_domains(); ++d) emb.trained_on.push_back(graph_->domain_digest(d));
  return emb;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = cfg_;
  c.params = params_;
  c.optimizer = optimizer_;
  c.epoch = epoch_;
  c.step = step_;
  for (const auto& r : positive_rngs_) c.positive_rng_states.push_back(serialize_rng(r));
  for (const auto& r : negative_rngs_) c.negative_rng_states.push_back(serialize_rng(r));
  c.dropout_rng_state = serialize_rng(dropout_rng_);
  for (const auto& s : positive_samplers_) {
    c.positive_orders.push_back(s.order());
    c.positive_cursors.push_back(s.cursor());
  }
  c.last_alpha = last_weights_.alpha;
  c.log = log_;
  for (int d = 0; d < graph_->n_domains(); ++d) c.graph_digests.push_back(graph_->domain_digest(d));
  return c;
}

Trainer Trainer::resume(const MultiGraph& g, const Checkpoint& ckpt) {
  Trainer t(g, ckpt.config);
  const auto n_domains = static_cast<std::size_t>(g.n_domains());
  std::vector<std::uint64_t> digests;
  for (int d = 0; d < g.n_domains(); ++d) digests.push_back(g.domain_digest(d));
  if (digests != ckpt.graph_digests) throw DataError("checkpoint was taken on a different graph");
  if (ckpt.params.n_domains() != g.n_domains() || ckpt.params.dims() != t.params_.dims()) {
    throw DataError("checkpoint parameters do not match the graph");
  }
  if (ckpt.positive_rng_states.size() != n_domains || ckpt.negative_rng_states.size() != n_domains ||
      ckpt.positive_orders.size() != n_domains || ckpt.positive_cursors.size() != n_domains) {
    throw DataError("checkpoint sampler state does not match domain count");
  }
  t.params_ = ckpt.params;
  t.optimizer_ = ckpt.optimizer;
  t.epoch_ = ckpt.epoch;
  t.step_ = ckpt.step;
  for (std::size_t d = 0; d < n_domains; ++d) {
    t.positive_rngs_[d] = deserialize_rng(ckpt.positive_rng_states[d]);
    t.negative_rngs_[d] = deserialize_rng(ckpt.negative_rng_states[d]);
    if (ckpt.positive_orders[d].size() != g.n_edges(static_cast<DomainId>(d))) {
      throw DataError("checkpoint sampler order does not match edge count");
    }
    t.positive_samplers_[d].restore(ckpt.positive_orders[d], ckpt.positive_cursors[d]);
  }
  t.dropout_rng_ = deserialize_rng(ckpt.dropout_rng_state);
  t.last_weights_ = DomainWeights{ckpt.last_alpha};
  t.log_ = ckpt.log;
  return t;
}

TrainResult train(const MultiGraph& g, const TrainConfig& cfg) {
  Trainer trainer(g, cfg);
  trainer.run();
  return TrainResult{trainer.params(), trainer.embeddings(), trainer.log()};
}

}  // namespace mgembed
