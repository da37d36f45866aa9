#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mgembed/multigraph.hpp"
#include "mgembed/rng.hpp"
#include "mgembed/types.hpp"

namespace mgembed {

// Layer widths: input features M, shared width E_s, per-domain width E.
struct LayerDims {
  Index input = 0;
  Index shared = 64;
  Index specific = 16;

  friend bool operator==(const LayerDims&, const LayerDims&) = default;
};

// Weights of the one shared layer (M x E_s) and the D specific layers
// (E_s x E each). There are no bias terms.
struct ModelParams {
  Matrix theta_s;
  std::vector<Matrix> theta_d;

  int n_domains() const noexcept { return static_cast<int>(theta_d.size()); }
  LayerDims dims() const;
  bool all_finite() const;
};

// Glorot-uniform initialisation, bounded by sqrt(6 / (fan_in + fan_out)) per
// matrix. Deterministic for a fixed seed.
ModelParams init_params(const LayerDims& dims, int n_domains, std::uint64_t seed);

// Node input features X0. The identity case (M = N) is kept implicit so the
// product with X0 can be skipped.
class FeatureMatrix {
 public:
  static FeatureMatrix identity(Index n_nodes);
  explicit FeatureMatrix(Matrix values);

  bool is_identity() const noexcept { return identity_; }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return identity_ ? rows_ : values_.cols(); }
  // Throws for identity features.
  const Matrix& values() const;
  Matrix dense() const;

 private:
  FeatureMatrix() = default;
  bool identity_ = false;
  Index rows_ = 0;
  Matrix values_;
};

// Output of one forward pass. trained_on records the per-domain edge digests
// of the graph the parameters were fitted on (empty when unknown).
struct EmbeddingSet {
  Matrix shared;
  std::vector<Matrix> domain;
  std::vector<std::uint64_t> trained_on;

  int n_domains() const noexcept { return static_cast<int>(domain.size()); }
};

struct DropoutRates {
  double shared = 0.3;
  double specific = 0.1;

  friend bool operator==(const DropoutRates&, const DropoutRates&) = default;
};

// Per-entry scale factors applied to each layer's input: 0 for dropped
// entries, 1/(1-p) for survivors. With identity features only the diagonal
// of X0 is non-zero, so the shared mask is stored as an N x 1 column.
struct DropoutMasks {
  Matrix shared;
  std::vector<Matrix> specific;
};

DropoutMasks draw_dropout_masks(const FeatureMatrix& x0, Index shared_width, int n_domains, const DropoutRates& rates,
                                Rng& rng);

// The normalized operators for the shared layer and every domain layer.
struct GraphOperators {
  NormalizedAdjacency shared;
  std::vector<NormalizedAdjacency> domain;

  static GraphOperators from_graph(const MultiGraph& g);
  int n_domains() const noexcept { return static_cast<int>(domain.size()); }
  Index n_nodes() const noexcept { return shared.size(); }
};

// ReLU(Â X0 Θ_s), with X0 masked entrywise when a mask is given.
Matrix forward_shared(const NormalizedAdjacency& adj, const FeatureMatrix& x0, const Matrix& theta_s,
                      const Matrix* dropout_mask = nullptr);

// ReLU(Â_d X_s Θ_d), with X_s masked entrywise when a mask is given.
Matrix forward_specific(const NormalizedAdjacency& adj_d, const Matrix& x_shared, const Matrix& theta_d,
                        const Matrix* dropout_mask = nullptr);

// Everything the backward pass needs from a forward evaluation.
struct ForwardPass {
  Matrix shared_pre;                    // Â X0 Θ_s
  Matrix shared;                        // X_s
  std::vector<Matrix> specific_input;   // X_s after the domain's dropout mask
  std::vector<Matrix> domain_pre;       // Â_d X_s Θ_d
  std::vector<Matrix> domain;           // X_d
};

ForwardPass forward_pass(const GraphOperators& ops, const FeatureMatrix& x0, const ModelParams& params,
                         const DropoutMasks* masks = nullptr, int threads = 1);

EmbeddingSet to_embeddings(ForwardPass&& pass);

// Full forward computation. In training mode fresh masks are drawn from rng;
// evaluation mode is deterministic and ignores rng.
EmbeddingSet forward_all(const MultiGraph& g, const FeatureMatrix& x0, const ModelParams& params, bool train_mode,
                         Rng& rng, const DropoutRates& rates = {});

void check_shapes(const GraphOperators& ops, const FeatureMatrix& x0, const ModelParams& params);

}  // namespace mgembed
