#include "mgembed/gcn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "parallel.hpp"

namespace mgembed {

LayerDims ModelParams::dims() const {
  return LayerDims{theta_s.rows(), theta_s.cols(), theta_d.empty() ? Index{0} : theta_d.front().cols()};
}

bool ModelParams::all_finite() const {
  if (!theta_s.allFinite()) return false;
  for (const auto& t : theta_d) {
    if (!t.allFinite()) return false;
  }
  return true;
}

namespace {

Matrix glorot(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = (2.0 * uniform01(rng) - 1.0) * bound;
  return m;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

}  // namespace

ModelParams init_params(const LayerDims& dims, int n_domains, std::uint64_t seed) {
  if (dims.input <= 0 || dims.shared <= 0 || dims.specific <= 0) {
    throw std::invalid_argument("layer dimensions must be positive");
  }
  if (n_domains < 1) throw std::invalid_argument("need at least one domain");
  ModelParams p;
  Rng shared_rng = make_stream(seed, "init.shared");
  p.theta_s = glorot(dims.input, dims.shared, shared_rng);
  for (int d = 0; d < n_domains; ++d) {
    Rng rng = make_stream(seed, "init.domain", static_cast<std::uint64_t>(d));
    p.theta_d.push_back(glorot(dims.shared, dims.specific, rng));
  }
  return p;
}

FeatureMatrix FeatureMatrix::identity(Index n_nodes) {
  if (n_nodes <= 0) throw std::invalid_argument("identity features need at least one node");
  FeatureMatrix f;
  f.identity_ = true;
  f.rows_ = n_nodes;
  return f;
}

FeatureMatrix::FeatureMatrix(Matrix values) : rows_(values.rows()), values_(std::move(values)) {
  if (values_.size() == 0) throw std::invalid_argument("empty feature matrix");
  if (!values_.allFinite()) throw std::invalid_argument("feature matrix has non-finite entries");
}

const Matrix& FeatureMatrix::values() const {
  if (identity_) throw std::logic_error("identity features are not materialised");
  return values_;
}

Matrix FeatureMatrix::dense() const {
  if (identity_) return Matrix::Identity(rows_, rows_);
  return values_;
}

DropoutMasks draw_dropout_masks(const FeatureMatrix& x0, Index shared_width, int n_domains, const DropoutRates& rates,
                                Rng& rng) {
  auto check = [](double p) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
  };
  check(rates.shared);
  check(rates.specific);
  auto draw = [&rng](Index rows, Index cols, double p) {
    Matrix m(rows, cols);
    const double keep_scale = 1.0 / (1.0 - p);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = uniform01(rng) < p ? 0.0 : keep_scale;
    return m;
  };
  DropoutMasks masks;
  masks.shared = draw(x0.rows(), x0.is_identity() ? 1 : x0.cols(), rates.shared);
  for (int d = 0; d < n_domains; ++d) masks.specific.push_back(draw(x0.rows(), shared_width, rates.specific));
  return masks;
}

GraphOperators GraphOperators::from_graph(const MultiGraph& g) {
  GraphOperators ops;
  ops.shared = union_adjacency(g);
  for (int d = 0; d < g.n_domains(); ++d) ops.domain.push_back(domain_adjacency(g, d));
  return ops;
}

Matrix forward_shared(const NormalizedAdjacency& adj, const FeatureMatrix& x0, const Matrix& theta_s,
                      const Matrix* dropout_mask) {
  const Index n = adj.size();
  if (x0.rows() != n) throw std::invalid_argument("feature rows do not match node count");
  if (theta_s.rows() != x0.cols()) {
    throw std::invalid_argument("theta_s has " + std::to_string(theta_s.rows()) + " rows, features have " +
                                std::to_string(x0.cols()) + " columns");
  }
  Matrix projected;
  if (x0.is_identity()) {
    if (dropout_mask) {
      if (dropout_mask->rows() != n || dropout_mask->cols() != 1) {
        throw std::invalid_argument("identity-feature dropout mask must be N x 1");
      }
      projected = dropout_mask->col(0).asDiagonal() * theta_s;
    } else {
      return relu(adj.matrix * theta_s);
    }
  } else if (dropout_mask) {
    if (dropout_mask->rows() != n || dropout_mask->cols() != x0.cols()) {
      throw std::invalid_argument("dropout mask shape does not match features");
    }
    projected = x0.values().cwiseProduct(*dropout_mask) * theta_s;
  } else {
    projected = x0.values() * theta_s;
  }
  return relu(adj.matrix * projected);
}

Matrix forward_specific(const NormalizedAdjacency& adj_d, const Matrix& x_shared, const Matrix& theta_d,
                        const Matrix* dropout_mask) {
  if (x_shared.rows() != adj_d.size()) throw std::invalid_argument("shared embedding rows do not match node count");
  if (theta_d.rows() != x_shared.cols()) throw std::invalid_argument("theta_d rows do not match shared width");
  if (dropout_mask) {
    if (dropout_mask->rows() != x_shared.rows() || dropout_mask->cols() != x_shared.cols()) {
      throw std::invalid_argument("dropout mask shape does not match shared embedding");
    }
    return relu(adj_d.matrix * (x_shared.cwiseProduct(*dropout_mask) * theta_d));
  }
  return relu(adj_d.matrix * (x_shared * theta_d));
}

void check_shapes(const GraphOperators& ops, const FeatureMatrix& x0, const ModelParams& params) {
  if (params.n_domains() != ops.n_domains()) {
    throw std::invalid_argument("parameter domain count " + std::to_string(params.n_domains()) +
                                " does not match graph domain count " + std::to_string(ops.n_domains()));
  }
  if (x0.rows() != ops.n_nodes()) throw std::invalid_argument("feature rows do not match node count");
  if (params.theta_s.rows() != x0.cols()) throw std::invalid_argument("theta_s rows do not match feature width");
  for (const auto& t : params.theta_d) {
    if (t.rows() != params.theta_s.cols()) throw std::invalid_argument("theta_d rows do not match shared width");
    if (t.cols() != params.theta_d.front().cols()) throw std::invalid_argument("inconsistent specific widths");
  }
}

ForwardPass forward_pass(const GraphOperators& ops, const FeatureMatrix& x0, const ModelParams& params,
                         const DropoutMasks* masks, int threads) {
  check_shapes(ops, x0, params);
  ForwardPass pass;
  const Matrix* shared_mask = masks ? &masks->shared : nullptr;
  if (x0.is_identity()) {
    pass.shared_pre = shared_mask ? Matrix(ops.shared.matrix * (shared_mask->col(0).asDiagonal() * params.theta_s))
                                  : Matrix(ops.shared.matrix * params.theta_s);
  } else {
    pass.shared_pre = shared_mask ? Matrix(ops.shared.matrix * (x0.values().cwiseProduct(*shared_mask) * params.theta_s))
                                  : Matrix(ops.shared.matrix * (x0.values() * params.theta_s));
  }
  pass.shared = relu(pass.shared_pre);

  const auto n_domains = static_cast<std::size_t>(params.n_domains());
  pass.specific_input.resize(n_domains);
  pass.domain_pre.resize(n_domains);
  pass.domain.resize(n_domains);
  parallel_for(n_domains, threads, [&](std::size_t d) {
    pass.specific_input[d] = masks ? Matrix(pass.shared.cwiseProduct(masks->specific.at(d))) : pass.shared;
    pass.domain_pre[d] = ops.domain[d].matrix * (pass.specific_input[d] * params.theta_d[d]);
    pass.domain[d] = relu(pass.domain_pre[d]);
  });
  return pass;
}

EmbeddingSet to_embeddings(ForwardPass&& pass) {
  EmbeddingSet emb;
  emb.shared = std::move(pass.shared);
  emb.domain = std::move(pass.domain);
  return emb;
}

EmbeddingSet forward_all(const MultiGraph& g, const FeatureMatrix& x0, const ModelParams& params, bool train_mode,
                         Rng& rng, const DropoutRates& rates) {
  const auto ops = GraphOperators::from_graph(g);
  if (!train_mode) return to_embeddings(forward_pass(ops, x0, params));
  const auto masks = draw_dropout_masks(x0, params.theta_s.cols(), params.n_domains(), rates, rng);
  return to_embeddings(forward_pass(ops, x0, params, &masks));
}

}  // namespace mgembed
