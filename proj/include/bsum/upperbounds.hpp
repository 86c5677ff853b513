// Copyright 2026 The bsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Block upperbounds g_j(W; anchor) and the minimisers that give the
// descent direction D_j.
//
//   first-order  f + <G, E> + (gamma/2)||E||^2             D = P(W - G/gamma)
//   second-order f + <G, E> + (gamma/2)||E||^2 + E'HE/2    D = W - (H + gamma I)^{-1} G
//   proximal     f_j(W) + (gamma/2)||E||^2                  D = prox_{f_j/gamma}(W_k)
//   linear       f + <G, E>                                 D = -G
//
// with E = W - W_k and G, H the block gradient and Hessian at the anchor.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "bsum/errors.hpp"
#include "bsum/functions.hpp"
#include "bsum/gradients.hpp"
#include "bsum/matrix.hpp"
#include "bsum/network.hpp"

namespace bsum {

struct InnerSolverConfig {
  std::size_t max_iters = 500;
  double grad_tol = 1e-8;
  double shrink = 0.5;   // backtracking factor beta
  double slope = 1e-4;   // Armijo fraction sigma

  void validate() const {
    if (max_iters < 1) throw SpecError("inner solver needs max_iters >= 1");
    if (!(grad_tol > 0.0)) throw SpecError("inner solver grad_tol must be positive");
    if (!(shrink > 0.0 && shrink < 1.0)) throw SpecError("inner solver shrink must lie in (0, 1)");
    if (!(slope > 0.0 && slope < 1.0)) throw SpecError("inner solver slope must lie in (0, 1)");
  }
};

enum class UpperboundType { FirstOrderProx, SecondOrderProx, Proximal, Linear };

struct UpperboundKind {
  UpperboundType type = UpperboundType::FirstOrderProx;
  double gamma = 1.0;
  InnerSolverConfig inner{};

  static UpperboundKind first_order(double gamma) { return {UpperboundType::FirstOrderProx, gamma, {}}; }
  static UpperboundKind second_order(double gamma) { return {UpperboundType::SecondOrderProx, gamma, {}}; }
  static UpperboundKind proximal(double gamma, InnerSolverConfig inner = {}) {
    return {UpperboundType::Proximal, gamma, inner};
  }
  static UpperboundKind linear() { return {UpperboundType::Linear, 0.0, {}}; }

  void validate() const {
    if (type != UpperboundType::Linear && !(gamma > 0.0)) {
      throw SpecError("proximal upperbounds need gamma > 0");
    }
    if (type == UpperboundType::Proximal) inner.validate();
  }

  std::string name() const {
    switch (type) {
      case UpperboundType::FirstOrderProx: return "first_order";
      case UpperboundType::SecondOrderProx: return "second_order";
      case UpperboundType::Proximal: return "proximal";
      case UpperboundType::Linear: return "linear";
    }
    return "?";
  }
};

/// f(v), or +inf when the evaluation overflows; line searches treat such a
/// trial point as rejected.
template <class F>
double value_or_inf(const F& f, const Matrix& v) {
  try {
    return f(v);
  } catch (const OverflowError&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// A smooth block function and its gradient.
struct SmoothFunction {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;

  static SmoothFunction of(const BlockObjective& block) {
    return {[&block](const Matrix& w) { return block.smooth_value(w); },
            [&block](const Matrix& w) { return block.smooth_gradient(w); }};
  }
};

/// Quantities evaluated at the anchor point W_bar^(k).
struct UpperboundAnchor {
  Matrix w;                     // W_j^(k)
  double f = 0.0;               // f(W_bar^(k))
  Matrix grad;                  // block gradient at the anchor
  std::optional<Matrix> hess;   // second-order only
  std::function<double(const Matrix&)> block_value;  // proximal only
};

inline double evaluate_upperbound(const UpperboundKind& kind, const Matrix& w, const UpperboundAnchor& anchor) {
  require_same_shape(w, anchor.w, "evaluate_upperbound");
  const Matrix e = w - anchor.w;
  switch (kind.type) {
    case UpperboundType::FirstOrderProx:
      return anchor.f + frobenius_dot(anchor.grad, e) + 0.5 * kind.gamma * e.squaredNorm();
    case UpperboundType::SecondOrderProx: {
      if (!anchor.hess) throw SpecError("second-order upperbound needs the block Hessian");
      const Vector v = vec(e);
      return anchor.f + frobenius_dot(anchor.grad, e) + 0.5 * kind.gamma * e.squaredNorm() +
             0.5 * v.dot(*anchor.hess * v);
    }
    case UpperboundType::Proximal:
      if (!anchor.block_value) throw SpecError("proximal upperbound needs the block objective");
      return anchor.block_value(w) + 0.5 * kind.gamma * e.squaredNorm();
    case UpperboundType::Linear:
      return anchor.f + frobenius_dot(anchor.grad, e);
  }
  return anchor.f;
}

// ---------------------------------------------------------------------------
// Direction solvers

inline Matrix descent_direction_first_order(const Matrix& w, const Matrix& grad, double gamma,
                                            const FeasibleSet& set = FeasibleSet::unconstrained()) {
  require_same_shape(w, grad, "first-order direction");
  if (!(gamma > 0.0)) throw SpecError("gamma must be positive");
  return project_feasible(set, w - grad / gamma);
}

inline constexpr int kMaxGammaDoublings = 50;

struct NewtonDirection {
  Matrix direction;
  double gamma = 0.0;  // damping actually used
};

/// Solves (H + gamma I) vec(D - W) = -vec(G) by Cholesky, doubling gamma
/// whenever H + gamma I is not positive definite.
inline NewtonDirection descent_direction_second_order(const Matrix& w, const Matrix& grad, const Matrix& hess,
                                                      double gamma) {
  require_same_shape(w, grad, "second-order direction");
  if (hess.rows() != w.size() || hess.cols() != w.size()) {
    throw ShapeError("Hessian must be " + std::to_string(w.size()) + " square, got " + shape_string(hess));
  }
  if (!(gamma > 0.0)) throw SpecError("gamma must be positive");
  const Vector rhs = -vec(grad);
  double g = gamma;
  for (int attempt = 0; attempt <= kMaxGammaDoublings; ++attempt, g *= 2.0) {
    Eigen::MatrixXd damped = hess;
    damped.diagonal().array() += g;
    Eigen::LLT<Eigen::MatrixXd> llt(damped);
    if (llt.info() != Eigen::Success) continue;
    const Vector step = llt.solve(rhs);
    if (!step.allFinite()) continue;
    return {w + unvec(step, w.rows(), w.cols()), g};
  }
  throw CurvatureError("Hessian + gamma I not positive definite after " + std::to_string(kMaxGammaDoublings) +
                       " doublings");
}

struct ProxResult {
  Matrix direction;
  std::size_t iterations = 0;
  double gradient_map_norm = 0.0;
  bool converged = false;
};

/// prox_{f/gamma}(W_k) over the feasible set, by projected gradient with
/// Armijo backtracking on phi(V) = f(V) + (gamma/2)||V - W_k||^2. Every
/// accepted step decreases phi, so phi(D) <= phi(W_k) = f(W_k).
inline ProxResult descent_direction_proximal(const SmoothFunction& f, const Matrix& w_k, double gamma,
                                             const FeasibleSet& set, const InnerSolverConfig& cfg) {
  if (!(gamma > 0.0)) throw SpecError("gamma must be positive");
  cfg.validate();
  auto phi = [&](const Matrix& v, double fv) { return fv + 0.5 * gamma * (v - w_k).squaredNorm(); };

  ProxResult out;
  Matrix v = project_feasible(set, w_k);
  double fv = f.value(v);
  double phi_v = phi(v, fv);
  double step = 1.0 / gamma;
  constexpr int kMaxShrinks = 60;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const Matrix g = f.gradient(v) + gamma * (v - w_k);
    bool accepted = false;
    Matrix cand;
    double f_cand = 0.0;
    double phi_cand = 0.0;
    for (int s = 0; s < kMaxShrinks; ++s) {
      cand = project_feasible(set, v - step * g);
      f_cand = value_or_inf(f.value, cand);
      phi_cand = phi(cand, f_cand);
      if (phi_cand <= phi_v + cfg.slope * frobenius_dot(g, cand - v)) {
        accepted = true;
        break;
      }
      step *= cfg.shrink;
    }
    out.iterations = it + 1;
    if (!accepted) {
      // no representable decrease left; v is as good as arithmetic allows
      out.gradient_map_norm = ((v - project_feasible(set, v - step * g)) / step).norm();
      out.converged = out.gradient_map_norm <= cfg.grad_tol;
      break;
    }
    out.gradient_map_norm = ((v - cand) / step).norm();
    v = std::move(cand);
    fv = f_cand;
    phi_v = phi_cand;
    if (out.gradient_map_norm <= cfg.grad_tol) {
      out.converged = true;
      break;
    }
    step /= cfg.shrink;
  }
  out.direction = std::move(v);
  return out;
}

/// Linear upperbound direction D = -G, so that the convex-combination
/// update reads W+ = (1 - a) W - a G. Only valid on concave blocks or
/// bounded feasible sets unless `override_check` is set.
inline Matrix descent_direction_linear(const Matrix& w, const Matrix& grad, const BlockCurvature& curvature,
                                       const FeasibleSet& set = FeasibleSet::unconstrained(),
                                       bool override_check = false) {
  require_same_shape(w, grad, "linear direction");
  if (!override_check && curvature.kind != CurvatureClass::Concave && !set.bounded()) {
    throw CurvatureError("linear upperbound used on a block that is not concave and not bounded");
  }
  return -grad;
}

/// Entrywise soft threshold of A = W - G/gamma at level lambda/gamma.
inline Matrix prox_l1_step(const Matrix& w, const Matrix& grad_smooth, double gamma, double lambda) {
  require_same_shape(w, grad_smooth, "prox_l1_step");
  if (!(gamma > 0.0)) throw SpecError("gamma must be positive");
  if (!(lambda >= 0.0)) throw SpecError("lambda must be nonnegative");
  const double tau = lambda / gamma;
  const Matrix a = w - grad_smooth / gamma;
  if (tau == 0.0) return a;
  return a.unaryExpr([tau](double x) {
    if (x > tau) return x - tau;
    if (x < -tau) return x + tau;
    return 0.0;
  });
}

// ---------------------------------------------------------------------------
// Gamma backtracking

struct BacktrackedDirection {
  Matrix direction;
  double gamma = 0.0;
  int doublings = 0;
};

/// Starting at gamma0, doubles gamma until the upperbound majorizes the
/// smooth block objective at the candidate direction:
/// f_j(D) <= g_j(D; anchor). `solve` maps gamma to a candidate D.
inline BacktrackedDirection backtrack_gamma(const UpperboundKind& kind, const BlockObjective& block,
                                            const UpperboundAnchor& anchor,
                                            const std::function<Matrix(double)>& solve) {
  UpperboundKind trial = kind;
  for (int d = 0; d <= kMaxGammaDoublings; ++d) {
    Matrix cand = solve(trial.gamma);
    const double f_cand = value_or_inf([&block](const Matrix& m) { return block.smooth_value(m); }, cand);
    if (std::isfinite(f_cand) && f_cand <= evaluate_upperbound(trial, cand, anchor)) {
      return {std::move(cand), trial.gamma, d};
    }
    trial.gamma *= 2.0;
  }
  throw CurvatureError("no majorizing gamma found after " + std::to_string(kMaxGammaDoublings) + " doublings");
}

// ---------------------------------------------------------------------------
// Deep linear networks

/// Exact minimiser over W_j of (1/N)||Y - A W_j B||_F^2 + lambda ||W_j||_F^2
/// with A = W_J..W_{j+1}, B = W_{j-1}..W_1 X. The normal equations
/// (1/N) A'A W BB' + lambda W = (1/N) A'Y B' are solved in the joint
/// eigenbasis of A'A and BB'.
inline Matrix closed_form_linear_block(const Network& net, const Dataset& data, std::size_t layer, double lambda) {
  check_layer(net, layer);
  data.validate();
  if (!is_deep_linear(net.spec)) throw SpecError("closed-form block solve needs identity activations");
  if (!(lambda >= 0.0)) throw SpecError("lambda must be nonnegative");
  const double n = static_cast<double>(data.size());

  Matrix b = data.x;
  for (std::size_t j = 0; j < layer; ++j) b = net.weights[j] * b;
  const auto out_dim = static_cast<Eigen::Index>(net.output_dim());
  Matrix a = Matrix::Identity(out_dim, out_dim);
  for (std::size_t j = net.depth(); j-- > layer + 1;) a = a * net.weights[j];

  const Eigen::MatrixXd ata = a.transpose() * a;
  const Eigen::MatrixXd bbt = b * b.transpose();
  const Eigen::MatrixXd rhs = a.transpose() * data.y * b.transpose() / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(ata);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(bbt);
  const Eigen::MatrixXd& u = ea.eigenvectors();
  const Eigen::MatrixXd& v = eb.eigenvectors();
  Eigen::MatrixXd core = u.transpose() * rhs * v;

  double largest = 0.0;
  for (Eigen::Index i = 0; i < core.rows(); ++i) {
    for (Eigen::Index k = 0; k < core.cols(); ++k) {
      largest = std::max(largest, std::abs(ea.eigenvalues()(i) * eb.eigenvalues()(k) / n + lambda));
    }
  }
  const double floor = std::max(largest, 1.0) * 1e-13;
  for (Eigen::Index i = 0; i < core.rows(); ++i) {
    for (Eigen::Index k = 0; k < core.cols(); ++k) {
      const double denom = std::max(ea.eigenvalues()(i), 0.0) * std::max(eb.eigenvalues()(k), 0.0) / n + lambda;
      if (denom <= floor) throw SingularError("normal equations are singular; use lambda > 0");
      core(i, k) /= denom;
    }
  }
  return Matrix(u * core * v.transpose());
}

}  // namespace bsum
