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

// Activation, loss and regularizer catalog.
//
// Every activation carries its analytic traits (convexity, concavity,
// monotonicity) so that the block-curvature classifier can decide whether a
// layer subproblem is strongly convex. Losses are functions of the network
// output H only; regularizers act on a single weight block.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/matrix.hpp"

namespace bsum {

namespace detail {

inline double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// log(1 + e^u) without overflow.
inline double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Activations

struct ActivationTraits {
  bool convex = false;
  bool concave = false;
  bool nondecreasing = false;
  bool smooth = true;
};

enum class ActivationType { Identity, Logistic, Tanh, Softplus, LeakyReLUSmooth, BentIdentity };

/// Elementwise activation. LeakyReLUSmooth is the smooth surrogate
/// a*u + (1 - a)*softplus(u), a in (0, 1).
class Activation {
 public:
  constexpr Activation() = default;
  constexpr explicit Activation(ActivationType type, double alpha = 0.0) : type_(type), alpha_(alpha) {
    if (type == ActivationType::LeakyReLUSmooth && !(alpha > 0.0 && alpha < 1.0)) {
      throw SpecError("LeakyReLUSmooth requires alpha in (0, 1)");
    }
  }

  static constexpr Activation identity() { return Activation(ActivationType::Identity); }
  static constexpr Activation logistic() { return Activation(ActivationType::Logistic); }
  static constexpr Activation tanh() { return Activation(ActivationType::Tanh); }
  static constexpr Activation softplus() { return Activation(ActivationType::Softplus); }
  static constexpr Activation leaky_relu_smooth(double alpha) {
    return Activation(ActivationType::LeakyReLUSmooth, alpha);
  }
  static constexpr Activation bent_identity() { return Activation(ActivationType::BentIdentity); }

  constexpr ActivationType type() const { return type_; }
  constexpr double alpha() const { return alpha_; }

  constexpr ActivationTraits traits() const {
    switch (type_) {
      case ActivationType::Identity: return {true, true, true, true};
      case ActivationType::Logistic: return {false, false, true, true};
      case ActivationType::Tanh: return {false, false, true, true};
      case ActivationType::Softplus: return {true, false, true, true};
      case ActivationType::LeakyReLUSmooth: return {true, false, true, true};
      case ActivationType::BentIdentity: return {true, false, true, true};
    }
    return {};
  }

  double value(double u) const {
    switch (type_) {
      case ActivationType::Identity: return u;
      case ActivationType::Logistic: return detail::logistic(u);
      case ActivationType::Tanh: return std::tanh(u);
      case ActivationType::Softplus: return detail::softplus(u);
      case ActivationType::LeakyReLUSmooth: return alpha_ * u + (1.0 - alpha_) * detail::softplus(u);
      case ActivationType::BentIdentity: return 0.5 * (std::sqrt(u * u + 1.0) - 1.0) + u;
    }
    return u;
  }

  double derivative(double u) const {
    switch (type_) {
      case ActivationType::Identity: return 1.0;
      case ActivationType::Logistic: {
        const double s = detail::logistic(u);
        return s * (1.0 - s);
      }
      case ActivationType::Tanh: {
        const double t = std::tanh(u);
        return 1.0 - t * t;
      }
      case ActivationType::Softplus: return detail::logistic(u);
      case ActivationType::LeakyReLUSmooth: return alpha_ + (1.0 - alpha_) * detail::logistic(u);
      case ActivationType::BentIdentity: return 0.5 * u / std::sqrt(u * u + 1.0) + 1.0;
    }
    return 1.0;
  }

  std::string name() const {
    switch (type_) {
      case ActivationType::Identity: return "identity";
      case ActivationType::Logistic: return "logistic";
      case ActivationType::Tanh: return "tanh";
      case ActivationType::Softplus: return "softplus";
      case ActivationType::LeakyReLUSmooth: return "leaky_relu_smooth";
      case ActivationType::BentIdentity: return "bent_identity";
    }
    return "?";
  }

  friend constexpr bool operator==(const Activation&, const Activation&) = default;

 private:
  ActivationType type_ = ActivationType::Identity;
  double alpha_ = 0.0;
};

inline Matrix activation_apply(const Activation& act, const Matrix& u) {
  return u.unaryExpr([&](double x) { return act.value(x); });
}

/// Elementwise derivative sigma'(U).
inline Matrix activation_derivative(const Activation& act, const Matrix& u) {
  return u.unaryExpr([&](double x) { return act.derivative(x); });
}

// ---------------------------------------------------------------------------
// Losses

enum class Monotonicity { Nondecreasing, Nonincreasing, None };

struct LossTraits {
  bool convex_in_h = false;
  bool concave_in_h = false;
  Monotonicity monotone = Monotonicity::None;
};

enum class LossType { L2, Exponential, CrossEntropy, SquaredHinge, Logistic };

/// Loss l(H, Y) with H = network output (d_J x N). Normalised by 1/N.
///
///   L2            (1/N) ||Y - H||_F^2
///   Exponential   c * exp((1/c)(1/N) ||Y - H||_F^2)
///   CrossEntropy  -(1/N) sum[Y o log H + (1 - Y) o log(1 - H)]
///   SquaredHinge  (1/(2cN)) sum (1 - Y o H)_+^2
///   Logistic      (1/N) sum_n log(1 + exp(-y_n^T h_n))
class Loss {
 public:
  constexpr Loss() = default;
  constexpr explicit Loss(LossType type, double c = 1.0) : type_(type), c_(c) {
    if ((type == LossType::Exponential || type == LossType::SquaredHinge) && !(c > 0.0)) {
      throw SpecError("loss constant c must be positive");
    }
  }

  static constexpr Loss l2() { return Loss(LossType::L2); }
  static constexpr Loss exponential(double c) { return Loss(LossType::Exponential, c); }
  static constexpr Loss cross_entropy() { return Loss(LossType::CrossEntropy); }
  static constexpr Loss squared_hinge(double c) { return Loss(LossType::SquaredHinge, c); }
  static constexpr Loss logistic() { return Loss(LossType::Logistic); }

  constexpr LossType type() const { return type_; }
  constexpr double c() const { return c_; }

  // The exponential loss is monotone in the residual norm; it is declared
  // nondecreasing, which holds elementwise wherever H >= Y.
  constexpr LossTraits traits() const {
    switch (type_) {
      case LossType::L2: return {true, false, Monotonicity::None};
      case LossType::Exponential: return {true, false, Monotonicity::Nondecreasing};
      case LossType::CrossEntropy: return {true, false, Monotonicity::None};
      case LossType::SquaredHinge: return {true, false, Monotonicity::None};
      case LossType::Logistic: return {true, false, Monotonicity::None};
    }
    return {};
  }

  std::string name() const {
    switch (type_) {
      case LossType::L2: return "l2";
      case LossType::Exponential: return "exponential";
      case LossType::CrossEntropy: return "cross_entropy";
      case LossType::SquaredHinge: return "squared_hinge";
      case LossType::Logistic: return "logistic";
    }
    return "?";
  }

  friend constexpr bool operator==(const Loss&, const Loss&) = default;

 private:
  LossType type_ = LossType::L2;
  double c_ = 1.0;
};

inline constexpr double kCrossEntropyClamp = 1e-12;
inline constexpr double kMaxExponent = 700.0;

namespace detail {

inline void check_labels(const Loss& loss, const Matrix& h, const Matrix& y) {
  require_same_shape(h, y, "loss");
  if (h.cols() < 1) throw ShapeError("loss: empty batch");
  switch (loss.type()) {
    case LossType::CrossEntropy:
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double v = y.data()[i];
        if (v != 0.0 && v != 1.0) throw DomainError("cross-entropy labels must be 0 or 1");
        const double p = h.data()[i];
        if (!(p >= 0.0 && p <= 1.0)) {
          throw DomainError("cross-entropy output outside [0, 1]: " + std::to_string(p));
        }
      }
      break;
    case LossType::SquaredHinge:
    case LossType::Logistic:
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double v = y.data()[i];
        if (v != 1.0 && v != -1.0) throw DomainError(loss.name() + " labels must be -1 or +1");
      }
      break;
    default:
      break;
  }
}

inline double exp_loss_exponent(const Loss& loss, const Matrix& h, const Matrix& y) {
  const double n = static_cast<double>(h.cols());
  const double e = (y - h).squaredNorm() / (loss.c() * n);
  if (e > kMaxExponent) {
    throw OverflowError("exponential loss exponent " + std::to_string(e) + " exceeds " +
                        std::to_string(kMaxExponent));
  }
  return e;
}

inline double clamp_prob(double p) {
  return std::min(std::max(p, kCrossEntropyClamp), 1.0 - kCrossEntropyClamp);
}

}  // namespace detail

inline double loss_value(const Loss& loss, const Matrix& h, const Matrix& y) {
  detail::check_labels(loss, h, y);
  const double n = static_cast<double>(h.cols());
  switch (loss.type()) {
    case LossType::L2:
      return (y - h).squaredNorm() / n;
    case LossType::Exponential:
      return loss.c() * std::exp(detail::exp_loss_exponent(loss, h, y));
    case LossType::CrossEntropy: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < h.size(); ++i) {
        const double p = detail::clamp_prob(h.data()[i]);
        const double t = y.data()[i];
        acc += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      }
      return -acc / n;
    }
    case LossType::SquaredHinge: {
      const Matrix margin = (1.0 - (y.array() * h.array())).max(0.0).matrix();
      return margin.squaredNorm() / (2.0 * loss.c() * n);
    }
    case LossType::Logistic: {
      double acc = 0.0;
      for (Eigen::Index col = 0; col < h.cols(); ++col) {
        acc += detail::softplus(-y.col(col).dot(h.col(col)));
      }
      return acc / n;
    }
  }
  return 0.0;
}

/// Gradient of loss_value with respect to H.
inline Matrix loss_grad_H(const Loss& loss, const Matrix& h, const Matrix& y) {
  detail::check_labels(loss, h, y);
  const double n = static_cast<double>(h.cols());
  switch (loss.type()) {
    case LossType::L2:
      return (2.0 / n) * (h - y);
    case LossType::Exponential: {
      const double scale = std::exp(detail::exp_loss_exponent(loss, h, y));
      return (2.0 / n) * scale * (h - y);
    }
    case LossType::CrossEntropy: {
      Matrix g(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < h.size(); ++i) {
        const double p = detail::clamp_prob(h.data()[i]);
        const double t = y.data()[i];
        g.data()[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
      }
      return g;
    }
    case LossType::SquaredHinge: {
      const Matrix margin = (1.0 - (y.array() * h.array())).max(0.0).matrix();
      return (-1.0 / (loss.c() * n)) * (y.array() * margin.array()).matrix();
    }
    case LossType::Logistic: {
      Matrix g(h.rows(), h.cols());
      for (Eigen::Index col = 0; col < h.cols(); ++col) {
        const double s = detail::logistic(-y.col(col).dot(h.col(col)));
        g.col(col) = (-s / n) * y.col(col);
      }
      return g;
    }
  }
  return Matrix::Zero(h.rows(), h.cols());
}

// ---------------------------------------------------------------------------
// Regularizers

enum class RegularizerType { None, L2Frobenius, L1 };

struct Regularizer {
  RegularizerType type = RegularizerType::None;
  double lambda = 0.0;

  static Regularizer none() { return {}; }
  static Regularizer l2(double lambda) { return {RegularizerType::L2Frobenius, lambda}; }
  static Regularizer l1(double lambda) { return {RegularizerType::L1, lambda}; }

  bool smooth() const { return type != RegularizerType::L1; }
  bool strongly_convex() const { return type == RegularizerType::L2Frobenius && lambda > 0.0; }
  double strong_convexity() const { return strongly_convex() ? 2.0 * lambda : 0.0; }

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw SpecError("regularizer strength must be a finite nonnegative number");
    }
  }

  std::string name() const {
    switch (type) {
      case RegularizerType::None: return "none";
      case RegularizerType::L2Frobenius: return "l2";
      case RegularizerType::L1: return "l1";
    }
    return "?";
  }

  friend bool operator==(const Regularizer&, const Regularizer&) = default;
};

inline double regularizer_value(const Regularizer& reg, const Matrix& w) {
  switch (reg.type) {
    case RegularizerType::None: return 0.0;
    case RegularizerType::L2Frobenius: return reg.lambda * w.squaredNorm();
    case RegularizerType::L1: return reg.lambda * w.cwiseAbs().sum();
  }
  return 0.0;
}

/// 2*lambda*W for L2; zero for None. L1 has no gradient and must go
/// through prox_l1_step.
inline Matrix regularizer_grad(const Regularizer& reg, const Matrix& w) {
  switch (reg.type) {
    case RegularizerType::None: return Matrix::Zero(w.rows(), w.cols());
    case RegularizerType::L2Frobenius: return (2.0 * reg.lambda) * w;
    case RegularizerType::L1:
      throw NonSmoothError("L1 regularizer has no gradient; use the proximal update");
  }
  return Matrix::Zero(w.rows(), w.cols());
}

// ---------------------------------------------------------------------------
// Block curvature

enum class CurvatureClass { StronglyConvex, Concave, Unknown };

struct BlockCurvature {
  CurvatureClass kind = CurvatureClass::Unknown;
  double modulus = 0.0;  // strong-convexity constant, StronglyConvex only

  std::string name() const {
    switch (kind) {
      case CurvatureClass::StronglyConvex: return "strongly_convex";
      case CurvatureClass::Concave: return "concave";
      case CurvatureClass::Unknown: return "unknown";
    }
    return "?";
  }
};

/// Classifies a block objective from declared traits alone.
///
/// C1: activations convex + nondecreasing, loss convex + nondecreasing.
/// C2: activations concave + nondecreasing, loss convex + nonincreasing.
/// Either one plus a strongly convex regularizer gives StronglyConvex.
/// Concave when activations are convex + nondecreasing, the loss is concave
/// + nonincreasing and there is no regularizer.
inline BlockCurvature classify_convexity(const LossTraits& loss,
                                         std::span<const ActivationTraits> activations,
                                         const Regularizer& reg) {
  bool all_convex_nd = true;
  bool all_concave_nd = true;
  for (const auto& a : activations) {
    all_convex_nd = all_convex_nd && a.convex && a.nondecreasing;
    all_concave_nd = all_concave_nd && a.concave && a.nondecreasing;
  }
  const bool c1 = all_convex_nd && loss.convex_in_h && loss.monotone == Monotonicity::Nondecreasing;
  const bool c2 = all_concave_nd && loss.convex_in_h && loss.monotone == Monotonicity::Nonincreasing;
  if ((c1 || c2) && reg.strongly_convex()) {
    return {CurvatureClass::StronglyConvex, reg.strong_convexity()};
  }
  const bool concave = all_convex_nd && loss.concave_in_h &&
                       loss.monotone == Monotonicity::Nonincreasing &&
                       (reg.type == RegularizerType::None || reg.lambda == 0.0);
  if (concave) return {CurvatureClass::Concave, 0.0};
  return {};
}

inline BlockCurvature classify_convexity(const Loss& loss, std::span<const Activation> activations,
                                         const Regularizer& reg) {
  std::vector<ActivationTraits> traits;
  traits.reserve(activations.size());
  for (const auto& a : activations) traits.push_back(a.traits());
  return classify_convexity(loss.traits(), traits, reg);
}

}  // namespace bsum
