#include "mgembed/mgda.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mgembed {

DomainWeights DomainWeights::uniform(int n_domains) {
  if (n_domains < 1) throw std::invalid_argument("need at least one domain");
  return DomainWeights{Vector::Constant(n_domains, 1.0 / n_domains)};
}

DomainWeights DomainWeights::checked(Vector alpha) {
  if (alpha.size() == 0) throw std::invalid_argument("empty weight vector");
  for (Index k = 0; k < alpha.size(); ++k) {
    if (!(alpha(k) >= 0.0 && alpha(k) <= 1.0)) throw std::invalid_argument("weight outside [0, 1]");
  }
  if (std::abs(alpha.sum() - 1.0) > 1e-9) throw std::invalid_argument("weights do not sum to 1");
  return DomainWeights{std::move(alpha)};
}

NormalizedGradient normalize_gradient(const Matrix& grad, double loss) {
  const double norm = grad.norm();
  if (!(norm > 0.0) || !(loss > 0.0) || !std::isfinite(norm) || !std::isfinite(loss)) {
    return NormalizedGradient{Matrix::Zero(grad.rows(), grad.cols()), true};
  }
  return NormalizedGradient{grad / (norm * loss), false};
}

double solve_alpha_2(double uu, double uv, double vv) {
  const double diff = uu - 2.0 * uv + vv;
  if (diff < 1e-18) return 0.5;
  if (uv >= vv) return 0.0;
  if (uv >= uu) return 1.0;
  return (vv - uv) / diff;
}

double solve_alpha_2(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) throw std::invalid_argument("solve_alpha_2: shape mismatch");
  const double diff = (u - v).squaredNorm();
  if (diff < 1e-18) return 0.5;
  const double uv = (u.array() * v.array()).sum();
  const double vv = v.squaredNorm();
  const double uu = u.squaredNorm();
  if (uv >= vv) return 0.0;
  if (uv >= uu) return 1.0;
  return (vv - uv) / diff;
}

DomainWeights solve_alpha_fw_gram(const Matrix& gram, int max_iters, double tol) {
  const Index n = gram.rows();
  if (n == 0 || gram.cols() != n) throw std::invalid_argument("Frank-Wolfe needs a non-empty square Gram matrix");
  Vector alpha = Vector::Constant(n, 1.0 / static_cast<double>(n));
  if (n == 1) return DomainWeights{alpha};
  double objective = alpha.dot(gram * alpha);
  for (int it = 0; it < max_iters; ++it) {
    const Vector g_alpha = gram * alpha;
    Index t = 0;
    g_alpha.minCoeff(&t);
    // Exact line search between the current combination c and vertex g_t.
    const double cc = alpha.dot(g_alpha);
    const double ct = g_alpha(t);
    const double tt = gram(t, t);
    const double gamma = solve_alpha_2(tt, ct, cc);
    Vector next = (1.0 - gamma) * alpha;
    next(t) += gamma;
    const double next_objective = next.dot(gram * next);
    if (next_objective > objective) break;
    const double improvement = objective - next_objective;
    alpha = next;
    objective = next_objective;
    if (improvement < tol) break;
  }
  // Clean up rounding so the result sits exactly on the simplex.
  alpha = alpha.cwiseMax(0.0);
  alpha /= alpha.sum();
  return DomainWeights{alpha};
}

DomainWeights solve_alpha_fw(const std::vector<Matrix>& grads, int max_iters, double tol) {
  if (grads.empty()) throw std::invalid_argument("Frank-Wolfe needs at least one gradient");
  const auto n = static_cast<Index>(grads.size());
  Matrix gram(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const auto& a = grads[static_cast<std::size_t>(i)];
      const auto& b = grads[static_cast<std::size_t>(j)];
      if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("gradient shapes differ");
      gram(i, j) = gram(j, i) = (a.array() * b.array()).sum();
    }
  }
  return solve_alpha_fw_gram(gram, max_iters, tol);
}

double min_norm_objective(const std::vector<Matrix>& grads, const DomainWeights& weights) {
  if (grads.empty() || static_cast<int>(grads.size()) != weights.size()) {
    throw std::invalid_argument("weight count does not match gradient count");
  }
  Matrix combined = Matrix::Zero(grads.front().rows(), grads.front().cols());
  for (std::size_t d = 0; d < grads.size(); ++d) combined += weights.alpha(static_cast<Index>(d)) * grads[d];
  return combined.squaredNorm();
}

DomainWeights fixed_alpha_weights(double alpha_1) {
  if (!(alpha_1 >= 0.0 && alpha_1 <= 1.0)) throw std::invalid_argument("fixed alpha must lie in [0, 1]");
  Vector a(2);
  a << alpha_1, 1.0 - alpha_1;
  return DomainWeights{a};
}

std::string to_string(OptimizerMethod method) { return method == OptimizerMethod::kSgd ? "sgd" : "adam"; }

OptimizerMethod parse_optimizer(const std::string& text) {
  if (text == "sgd") return OptimizerMethod::kSgd;
  if (text == "adam") return OptimizerMethod::kAdam;
  throw std::invalid_argument("unknown optimizer '" + text + "' (expected sgd or adam)");
}

OptimizerState OptimizerState::create(OptimizerMethod method, double learning_rate, const ModelParams& params) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  OptimizerState s;
  s.method = method;
  s.learning_rate = learning_rate;
  auto zeros = [](const Matrix& like) {
    return AdamMoments{Matrix::Zero(like.rows(), like.cols()), Matrix::Zero(like.rows(), like.cols()), 0};
  };
  s.shared = zeros(params.theta_s);
  for (const auto& t : params.theta_d) s.domain.push_back(zeros(t));
  return s;
}

void optimizer_step(Matrix& param, const Matrix& direction, AdamMoments& moments, const OptimizerState& state) {
  if (param.rows() != direction.rows() || param.cols() != direction.cols()) {
    throw std::invalid_argument("update direction shape does not match parameter");
  }
  if (state.method == OptimizerMethod::kSgd) {
    param -= state.learning_rate * direction;
    return;
  }
  if (moments.first.rows() != param.rows() || moments.first.cols() != param.cols()) {
    throw std::invalid_argument("Adam moment shape does not match parameter");
  }
  ++moments.steps;
  moments.first = state.beta1 * moments.first + (1.0 - state.beta1) * direction;
  moments.second = state.beta2 * moments.second + (1.0 - state.beta2) * direction.cwiseAbs2();
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(moments.steps));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(moments.steps));
  param.array() -= state.learning_rate * (moments.first.array() / bias1) /
                   ((moments.second.array() / bias2).sqrt() + state.epsilon);
}

Matrix shared_direction(const std::vector<GradientBundle>& bundles, const DomainWeights& weights, SharedStep mode) {
  if (bundles.empty() || static_cast<int>(bundles.size()) != weights.size()) {
    throw std::invalid_argument("need exactly one gradient bundle per domain weight");
  }
  Matrix direction = Matrix::Zero(bundles.front().grad_theta_s.rows(), bundles.front().grad_theta_s.cols());
  for (std::size_t d = 0; d < bundles.size(); ++d) {
    const auto& g = bundles[d].grad_theta_s;
    if (g.rows() != direction.rows() || g.cols() != direction.cols()) {
      throw std::invalid_argument("shared gradient shapes differ between domains");
    }
    const double a = weights.alpha(static_cast<Index>(d));
    if (mode == SharedStep::kNormalized) {
      direction += a * normalize_gradient(g, bundles[d].loss).value;
    } else {
      direction += a * g;
    }
  }
  return direction;
}

void apply_updates(ModelParams& params, const std::vector<GradientBundle>& bundles, const DomainWeights& weights,
                   OptimizerState& state, SharedStep mode) {
  if (static_cast<int>(bundles.size()) != params.n_domains()) {
    throw std::invalid_argument("need exactly one gradient bundle per domain");
  }
  for (std::size_t d = 0; d < bundles.size(); ++d) {
    if (bundles[d].domain != static_cast<DomainId>(d)) throw std::invalid_argument("gradient bundles out of domain order");
  }
  const Matrix shared = shared_direction(bundles, weights, mode);
  if (state.domain.size() != bundles.size()) throw std::invalid_argument("optimizer state has wrong domain count");
  for (std::size_t d = 0; d < bundles.size(); ++d) {
    optimizer_step(params.theta_d[d], bundles[d].grad_theta_d, state.domain[d], state);
  }
  optimizer_step(params.theta_s, shared, state.shared, state);
}

}  // namespace mgembed
