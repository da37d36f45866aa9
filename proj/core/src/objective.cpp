#include "mgembed/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mgembed/error.hpp"

namespace mgembed {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// -log(max(sigmoid(z), kLogClamp)), evaluated without cancellation.
double neg_log_sigmoid(double z) {
  const double softplus = z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  static const double cap = -std::log(kLogClamp);
  return std::min(softplus, cap);
}

double checked_dot(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("embedding dimensions differ");
  if (!a.allFinite() || !b.allFinite()) throw std::invalid_argument("non-finite embedding entry");
  return a.dot(b);
}

}  // namespace

double edge_prob(const Eigen::Ref<const Vector>& x_i, const Eigen::Ref<const Vector>& x_j) {
  return sigmoid(checked_dot(x_i, x_j));
}

double non_edge_prob(const Eigen::Ref<const Vector>& x_i, const Eigen::Ref<const Vector>& x_k) {
  return sigmoid(-checked_dot(x_i, x_k));
}

std::string to_string(NegativeDistribution dist) {
  return dist == NegativeDistribution::kUniform ? "uniform" : "degree0.75";
}

NegativeDistribution parse_negative_distribution(const std::string& text) {
  if (text == "uniform") return NegativeDistribution::kUniform;
  if (text == "degree0.75" || text == "degree^0.75" || text == "unigram") return NegativeDistribution::kDegreePow075;
  throw std::invalid_argument("unknown negative distribution '" + text + "' (expected uniform or degree0.75)");
}

NegativeSampler::NegativeSampler(const MultiGraph& g, DomainId d, NegativeDistribution dist)
    : graph_(&g), domain_(d), dist_(dist) {
  const auto n = static_cast<std::size_t>(g.n_nodes());
  if (n == 0) throw std::invalid_argument("negative sampling on an empty graph");
  std::vector<double> weight(n, 1.0);
  if (dist == NegativeDistribution::kDegreePow075) {
    std::vector<double> degree(n, 0.0);
    for (const auto& e : g.edges(d)) {
      degree[static_cast<std::size_t>(e.i)] += e.weight;
      degree[static_cast<std::size_t>(e.j)] += e.weight;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      weight[k] = std::pow(degree[k], 0.75);
      total += weight[k];
    }
    if (total <= 0.0) std::fill(weight.begin(), weight.end(), 1.0);
  }
  cumulative_.resize(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += weight[k];
    cumulative_[k] = acc;
  }
}

NodeId NegativeSampler::draw(Rng& rng) const {
  const double u = uniform01(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return static_cast<NodeId>(it - cumulative_.begin());
}

double NegativeSampler::probability(NodeId node) const {
  const auto k = static_cast<std::size_t>(node);
  const double prev = k == 0 ? 0.0 : cumulative_[k - 1];
  return (cumulative_[k] - prev) / cumulative_.back();
}

NodeId NegativeSampler::draw_for(NodeId anchor, Rng& rng) const {
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    const NodeId k = draw(rng);
    if (k != anchor && !graph_->has_edge(domain_, anchor, k)) return k;
  }
  std::vector<NodeId> candidates;
  for (NodeId k = 0; k < graph_->n_nodes(); ++k) {
    if (k != anchor && !graph_->has_edge(domain_, anchor, k)) candidates.push_back(k);
  }
  if (candidates.empty()) {
    throw SaturationError("negative sampling saturated: node " + std::to_string(anchor) +
                          " is adjacent to every other node in domain " + std::to_string(domain_));
  }
  return candidates[uniform_index(rng, candidates.size())];
}

PositiveSampler::PositiveSampler(std::size_t n_edges) : order_(n_edges), cursor_(n_edges) {
  for (std::size_t k = 0; k < n_edges; ++k) order_[k] = k;
}

std::vector<std::size_t> PositiveSampler::next(std::size_t count, Rng& rng) {
  if (order_.empty()) throw std::logic_error("positive sampler over an empty edge set");
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (cursor_ >= order_.size()) {
      // Fisher-Yates with the library's own index draw.
      for (std::size_t k = order_.size() - 1; k > 0; --k) std::swap(order_[k], order_[uniform_index(rng, k + 1)]);
      cursor_ = 0;
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

void PositiveSampler::restore(std::vector<std::size_t> order, std::size_t cursor) {
  if (cursor > order.size()) throw std::invalid_argument("positive sampler cursor out of range");
  order_ = std::move(order);
  cursor_ = cursor;
}

SampleBatch make_batch(const MultiGraph& g, DomainId d, const std::vector<std::size_t>& edge_indices,
                       int negatives_per_positive, const NegativeSampler& negatives, Rng& rng) {
  if (negatives_per_positive < 1) throw std::invalid_argument("need at least one negative per positive");
  const auto& edges = g.edges(d);
  SampleBatch batch;
  batch.domain = d;
  batch.negatives_per_positive = negatives_per_positive;
  batch.positives.reserve(edge_indices.size());
  batch.negatives.reserve(edge_indices.size() * static_cast<std::size_t>(negatives_per_positive));
  for (auto idx : edge_indices) {
    const Edge& e = edges.at(idx);
    const bool flip = (rng() & 1U) != 0;
    const NodeId anchor = flip ? e.j : e.i;
    const NodeId context = flip ? e.i : e.j;
    batch.positives.emplace_back(anchor, context);
    for (int s = 0; s < negatives_per_positive; ++s) batch.negatives.push_back(negatives.draw_for(anchor, rng));
  }
  return batch;
}

SampleBatch sample_batch(const MultiGraph& g, DomainId d, std::size_t batch_size, int negatives_per_positive,
                         Rng& rng, NegativeDistribution dist) {
  const std::size_t m = g.n_edges(d);
  if (m == 0) throw DataError("domain " + std::to_string(d) + " has no edges to sample");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<std::size_t> idx(m);
  for (std::size_t k = 0; k < m; ++k) idx[k] = k;
  const std::size_t take = std::min(batch_size, m);
  for (std::size_t k = 0; k < take; ++k) std::swap(idx[k], idx[k + uniform_index(rng, m - k)]);
  idx.resize(take);
  NegativeSampler negatives(g, d, dist);
  return make_batch(g, d, idx, negatives_per_positive, negatives, rng);
}

double domain_loss(const SampleBatch& batch, const Matrix& x_d) {
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.positives.size(); ++k) {
    const auto [i, j] = batch.positives[k];
    loss += neg_log_sigmoid(x_d.row(i).dot(x_d.row(j)));
    for (int s = 0; s < batch.negatives_per_positive; ++s) {
      loss += neg_log_sigmoid(-x_d.row(i).dot(x_d.row(batch.negative(k, s))));
    }
  }
  return loss;
}

double domain_loss(const SampleBatch& batch, const EmbeddingSet& emb) {
  if (batch.domain < 0 || batch.domain >= emb.n_domains()) throw std::invalid_argument("batch domain not in embedding set");
  return domain_loss(batch, emb.domain[static_cast<std::size_t>(batch.domain)]);
}

GradientBundle backward(const SampleBatch& batch, const GraphOperators& ops, const FeatureMatrix& x0,
                        const ModelParams& params, const ForwardPass& pass, const DropoutMasks* masks) {
  const auto d = static_cast<std::size_t>(batch.domain);
  const Matrix& x_d = pass.domain.at(d);
  const Matrix& theta_d = params.theta_d.at(d);

  // dL/dX_d: each scored pair (a, b) with residual r adds r*x_b to row a and
  // r*x_a to row b.
  Matrix grad_x = Matrix::Zero(x_d.rows(), x_d.cols());
  double loss = 0.0;
  auto accumulate = [&](NodeId a, NodeId b, double r) {
    grad_x.row(a) += r * x_d.row(b);
    grad_x.row(b) += r * x_d.row(a);
  };
  for (std::size_t k = 0; k < batch.positives.size(); ++k) {
    const auto [i, j] = batch.positives[k];
    const double score = x_d.row(i).dot(x_d.row(j));
    loss += neg_log_sigmoid(score);
    accumulate(i, j, sigmoid(score) - 1.0);
    for (int s = 0; s < batch.negatives_per_positive; ++s) {
      const NodeId n = batch.negative(k, s);
      const double neg_score = x_d.row(i).dot(x_d.row(n));
      loss += neg_log_sigmoid(-neg_score);
      accumulate(i, n, sigmoid(neg_score));
    }
  }

  // ReLU subgradient is 0 at exactly 0.
  const Matrix grad_pre_d = grad_x.cwiseProduct((pass.domain_pre[d].array() > 0.0).cast<double>().matrix());
  const Matrix propagated_d = ops.domain.at(d).matrix * grad_pre_d;  // Â_d is symmetric

  GradientBundle out;
  out.domain = batch.domain;
  out.loss = loss;
  out.grad_theta_d = pass.specific_input[d].transpose() * propagated_d;

  Matrix grad_shared = propagated_d * theta_d.transpose();
  if (masks) grad_shared = grad_shared.cwiseProduct(masks->specific.at(d));
  const Matrix grad_pre_s = grad_shared.cwiseProduct((pass.shared_pre.array() > 0.0).cast<double>().matrix());
  const Matrix propagated_s = ops.shared.matrix * grad_pre_s;
  if (x0.is_identity()) {
    out.grad_theta_s = masks ? Matrix(masks->shared.col(0).asDiagonal() * propagated_s) : propagated_s;
  } else {
    out.grad_theta_s = masks ? Matrix(x0.values().cwiseProduct(masks->shared).transpose() * propagated_s)
                             : Matrix(x0.values().transpose() * propagated_s);
  }
  return out;
}

GradientBundle backward(const SampleBatch& batch, const MultiGraph& g, const FeatureMatrix& x0,
                        const ModelParams& params, const DropoutMasks* masks) {
  const auto ops = GraphOperators::from_graph(g);
  const auto pass = forward_pass(ops, x0, params, masks);
  return backward(batch, ops, x0, params, pass, masks);
}

double batch_loss(const SampleBatch& batch, const GraphOperators& ops, const FeatureMatrix& x0,
                  const ModelParams& params) {
  const auto d = static_cast<std::size_t>(batch.domain);
  const Matrix x_s = forward_shared(ops.shared, x0, params.theta_s);
  return domain_loss(batch, forward_specific(ops.domain.at(d), x_s, params.theta_d.at(d)));
}

GradientBundle finite_diff_grad(const SampleBatch& batch, const MultiGraph& g, const FeatureMatrix& x0,
                                const ModelParams& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const auto ops = GraphOperators::from_graph(g);
  check_shapes(ops, x0, params);
  const auto d = static_cast<std::size_t>(batch.domain);
  ModelParams probe = params;

  auto central = [&](Matrix& target, Matrix& grad) {
    grad.resize(target.rows(), target.cols());
    for (Index k = 0; k < target.size(); ++k) {
      const double saved = target.data()[k];
      target.data()[k] = saved + h;
      const double up = batch_loss(batch, ops, x0, probe);
      target.data()[k] = saved - h;
      const double down = batch_loss(batch, ops, x0, probe);
      target.data()[k] = saved;
      grad.data()[k] = (up - down) / (2.0 * h);
    }
  };

  GradientBundle out;
  out.domain = batch.domain;
  out.loss = batch_loss(batch, ops, x0, params);
  central(probe.theta_s, out.grad_theta_s);
  central(probe.theta_d.at(d), out.grad_theta_d);
  return out;
}

Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Vector probe = x;
  Vector grad(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + h;
    const double up = f(probe);
    probe(k) = x(k) - h;
    const double down = f(probe);
    probe(k) = x(k);
    grad(k) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace mgembed
