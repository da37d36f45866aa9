#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mgembed/gcn.hpp"
#include "mgembed/multigraph.hpp"
#include "mgembed/rng.hpp"
#include "mgembed/types.hpp"

namespace mgembed {

// Floor applied to probabilities before taking logs in the loss.
inline constexpr double kLogClamp = 1e-12;

double sigmoid(double z) noexcept;

// p(edge | x_i, x_j) = sigmoid(x_i . x_j). Throws on non-finite input or a
// dimension mismatch.
double edge_prob(const Eigen::Ref<const Vector>& x_i, const Eigen::Ref<const Vector>& x_j);
// p(no edge | x_i, x_k) = sigmoid(-x_i . x_k).
double non_edge_prob(const Eigen::Ref<const Vector>& x_i, const Eigen::Ref<const Vector>& x_k);

enum class NegativeDistribution { kUniform, kDegreePow075 };

std::string to_string(NegativeDistribution dist);
NegativeDistribution parse_negative_distribution(const std::string& text);

// Positive edges of one domain, each with S negatives sharing its anchor.
// positives[k] = (anchor, context); negatives[k*S .. k*S+S) belong to it.
struct SampleBatch {
  DomainId domain = 0;
  int negatives_per_positive = 0;
  std::vector<std::pair<NodeId, NodeId>> positives;
  std::vector<NodeId> negatives;

  NodeId negative(std::size_t positive, int s) const {
    return negatives[positive * static_cast<std::size_t>(negatives_per_positive) + static_cast<std::size_t>(s)];
  }
};

// Noise distribution over nodes for one domain (uniform or weighted
// degree^0.75), plus rejection against the domain's edges.
class NegativeSampler {
 public:
  static constexpr int kMaxRetries = 100;

  NegativeSampler(const MultiGraph& g, DomainId d, NegativeDistribution dist);

  // One raw draw from the noise distribution (no rejection).
  NodeId draw(Rng& rng) const;

  // A node k != anchor with no edge (anchor, k) in the domain. Falls back to
  // a uniform pick among all non-neighbours after kMaxRetries rejections;
  // throws SaturationError when the anchor has no non-neighbour at all.
  NodeId draw_for(NodeId anchor, Rng& rng) const;

  // Probability of `node` under the noise distribution.
  double probability(NodeId node) const;

 private:
  const MultiGraph* graph_;
  DomainId domain_;
  NegativeDistribution dist_;
  std::vector<double> cumulative_;
};

// Cycles over a domain's edge indices in reshuffled passes: every edge is
// visited once before any repeats.
class PositiveSampler {
 public:
  PositiveSampler() = default;
  explicit PositiveSampler(std::size_t n_edges);

  std::vector<std::size_t> next(std::size_t count, Rng& rng);

  std::size_t n_edges() const noexcept { return order_.size(); }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t cursor() const noexcept { return cursor_; }
  void restore(std::vector<std::size_t> order, std::size_t cursor);

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Builds a batch from chosen edge indices; each positive's anchor endpoint is
// picked by a fair coin.
SampleBatch make_batch(const MultiGraph& g, DomainId d, const std::vector<std::size_t>& edge_indices,
                       int negatives_per_positive, const NegativeSampler& negatives, Rng& rng);

// min(batch_size, |E_d|) positives drawn uniformly without replacement, S
// negatives each.
SampleBatch sample_batch(const MultiGraph& g, DomainId d, std::size_t batch_size, int negatives_per_positive,
                         Rng& rng, NegativeDistribution dist = NegativeDistribution::kDegreePow075);

// Summed negative log-likelihood of the batch under embeddings x_d.
double domain_loss(const SampleBatch& batch, const Matrix& x_d);
double domain_loss(const SampleBatch& batch, const EmbeddingSet& emb);

struct GradientBundle {
  DomainId domain = 0;
  Matrix grad_theta_s;
  Matrix grad_theta_d;
  double loss = 0.0;
};

// Exact gradients of the batch loss through the specific and shared layers.
// `masks` must be the ones used to produce `pass` (nullptr when dropout was
// off).
GradientBundle backward(const SampleBatch& batch, const GraphOperators& ops, const FeatureMatrix& x0,
                        const ModelParams& params, const ForwardPass& pass, const DropoutMasks* masks);

// Convenience form that runs its own forward pass with the given masks.
GradientBundle backward(const SampleBatch& batch, const MultiGraph& g, const FeatureMatrix& x0,
                        const ModelParams& params, const DropoutMasks* masks = nullptr);

// Loss of the batch at `params` with dropout off.
double batch_loss(const SampleBatch& batch, const GraphOperators& ops, const FeatureMatrix& x0,
                  const ModelParams& params);

// Coordinate-wise central differences (L(θ+h) - L(θ-h)) / 2h of the batch
// loss with respect to Θ_s and Θ_d, dropout off.
GradientBundle finite_diff_grad(const SampleBatch& batch, const MultiGraph& g, const FeatureMatrix& x0,
                                const ModelParams& params, double h);

// Central-difference gradient of an arbitrary scalar function.
Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x, double h);

}  // namespace mgembed
