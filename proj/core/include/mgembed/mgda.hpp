#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgembed/gcn.hpp"
#include "mgembed/objective.hpp"
#include "mgembed/types.hpp"

namespace mgembed {

// Per-domain weights on the probability simplex.
struct DomainWeights {
  Vector alpha;

  static DomainWeights uniform(int n_domains);
  // Throws unless entries lie in [0, 1] and sum to 1 within 1e-9.
  static DomainWeights checked(Vector alpha);
  int size() const noexcept { return static_cast<int>(alpha.size()); }
};

struct NormalizedGradient {
  Matrix value;
  bool degenerate = false;
};

// G / (||G||_F * L). A zero gradient norm or non-positive loss yields a zero
// matrix flagged degenerate.
NormalizedGradient normalize_gradient(const Matrix& grad, double loss);

// argmin over a in [0, 1] of ||a u + (1 - a) v||^2.
// Returns 0 when u.v >= v.v, else 1 when u.v >= u.u, else (v - u).v / ||u - v||^2.
// Nearly identical inputs (||u - v||^2 < 1e-18) give 0.5.
double solve_alpha_2(const Matrix& u, const Matrix& v);
// Same rule from the inner products u.u, u.v, v.v.
double solve_alpha_2(double uu, double uv, double vv);

// Frank-Wolfe on the simplex for min ||sum_d a_d g_d||^2, starting from
// uniform weights with exact line search along each chosen vertex.
DomainWeights solve_alpha_fw(const std::vector<Matrix>& grads, int max_iters = 50, double tol = 1e-8);
// Same, given the Gram matrix G(i, j) = g_i . g_j.
DomainWeights solve_alpha_fw_gram(const Matrix& gram, int max_iters = 50, double tol = 1e-8);

// ||sum_d a_d g_d||^2.
double min_norm_objective(const std::vector<Matrix>& grads, const DomainWeights& weights);

// Constant (a, 1 - a) for two domains.
DomainWeights fixed_alpha_weights(double alpha_1);

enum class OptimizerMethod { kSgd, kAdam };

std::string to_string(OptimizerMethod method);
OptimizerMethod parse_optimizer(const std::string& text);

struct AdamMoments {
  Matrix first;
  Matrix second;
  std::int64_t steps = 0;
};

struct OptimizerState {
  OptimizerMethod method = OptimizerMethod::kAdam;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  AdamMoments shared;
  std::vector<AdamMoments> domain;

  static OptimizerState create(OptimizerMethod method, double learning_rate, const ModelParams& params);
};

// Which gradients the shared step combines with the weights.
enum class SharedStep { kUnnormalized, kNormalized };

// sum_d a_d dL_d/dΘ_s over the bundles (normalized first when asked).
Matrix shared_direction(const std::vector<GradientBundle>& bundles, const DomainWeights& weights,
                        SharedStep mode = SharedStep::kUnnormalized);

// Θ_d follows its own domain's gradient; Θ_s follows the weighted
// combination. SGD steps by -lr * direction, Adam feeds the same direction
// through its moment estimates.
void apply_updates(ModelParams& params, const std::vector<GradientBundle>& bundles, const DomainWeights& weights,
                   OptimizerState& state, SharedStep mode = SharedStep::kUnnormalized);

// One optimizer step on a single matrix.
void optimizer_step(Matrix& param, const Matrix& direction, AdamMoments& moments, const OptimizerState& state);

}  // namespace mgembed
