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

// Matrix-form backpropagation.
//
//   Delta_J = grad_H l o Sigma_J'(U_J)
//   Delta_j = (W_{j+1}^T Delta_{j+1}) o Sigma_j'(U_j)
//   grad_{W_j} f = Delta_j Z_{j-1}^T + grad r_j(W_j)
//
// plus mini-batch gradients, batch samplers and the finite-difference
// oracles used by the test suites and the second-order upperbound.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/functions.hpp"
#include "bsum/matrix.hpp"
#include "bsum/network.hpp"

namespace bsum {

struct DeltaStack {
  std::vector<Matrix> deltas;  // deltas[j] is d_{j+1} x N, one per layer
};

/// Backpropagates the output gradient through layers [first, J). `outs` must
/// come from forward_from(net, first, ...), so outs.pre[i] belongs to layer
/// first + i. Returned deltas are indexed the same way.
inline DeltaStack delta_recursion_from(const Network& net, std::size_t first, const LayerOutputs& outs,
                                       const Loss& loss, const Matrix& y) {
  const std::size_t count = net.depth() - first;
  if (outs.pre.size() != count || outs.post.size() != count + 1) {
    throw ShapeError("layer outputs do not match network depth");
  }
  require_same_shape(outs.post.back(), y, "delta_recursion");
  DeltaStack stack;
  stack.deltas.resize(count);
  const std::size_t last = count - 1;
  stack.deltas[last] = loss_grad_H(loss, outs.post.back(), y)
                           .cwiseProduct(activation_derivative(net.spec.activations.back(), outs.pre[last]));
  for (std::size_t i = last; i-- > 0;) {
    const std::size_t layer = first + i;
    stack.deltas[i] = (net.weights[layer + 1].transpose() * stack.deltas[i + 1])
                          .cwiseProduct(activation_derivative(net.spec.activations[layer], outs.pre[i]));
  }
  return stack;
}

inline DeltaStack delta_recursion(const Network& net, const LayerOutputs& outs, const Loss& loss,
                                  const Matrix& y) {
  return delta_recursion_from(net, 0, outs, loss, y);
}

/// f(W) = l(H(X), Y) + sum_j r_j(W_j), L1 terms included.
inline double objective(const Network& net, const Dataset& data, const Loss& loss) {
  data.validate();
  const Matrix h = network_output(net, data.x);
  double f = loss_value(loss, h, data.y);
  for (std::size_t j = 0; j < net.depth(); ++j) f += regularizer_value(net.spec.regularizers[j], net.weights[j]);
  return f;
}

/// Normalised training MSE ||Y - H||_F^2 / ||Y - Ybar||_F^2, Ybar the
/// per-output mean replicated over samples.
inline double normalized_mse(const Network& net, const Dataset& data) {
  const Matrix h = network_output(net, data.x);
  const Vector mean = data.y.rowwise().mean();
  const double denom = (data.y.colwise() - mean).squaredNorm();
  const double num = (data.y - h).squaredNorm();
  return denom > 0.0 ? num / denom : num;
}

inline void check_layer(const Network& net, std::size_t layer) {
  if (layer >= net.depth()) {
    throw SpecError("layer index " + std::to_string(layer) + " out of range for depth " +
                    std::to_string(net.depth()));
  }
}

/// Delta_j Z_{j-1}^T, without the regularizer term.
inline Matrix loss_block_gradient(const Network& net, const Dataset& data, const Loss& loss, std::size_t layer) {
  check_layer(net, layer);
  data.validate();
  const LayerOutputs outs = forward(net, data.x);
  const DeltaStack d = delta_recursion(net, outs, loss, data.y);
  return d.deltas[layer] * outs.post[layer].transpose();
}

/// grad_{W_j} f for a layer whose regularizer is smooth.
inline Matrix block_gradient(const Network& net, const Dataset& data, const Loss& loss, std::size_t layer) {
  check_layer(net, layer);
  const Regularizer& reg = net.spec.regularizers[layer];
  if (!reg.smooth()) {
    throw NonSmoothError("layer " + std::to_string(layer) + " has an L1 regularizer; combined gradient undefined");
  }
  return loss_block_gradient(net, data, loss, layer) + regularizer_grad(reg, net.weights[layer]);
}

/// Gradients of every block from one forward/backward pass. L1 layers get
/// the loss part only.
inline std::vector<Matrix> all_block_gradients(const Network& net, const Dataset& data, const Loss& loss) {
  data.validate();
  const LayerOutputs outs = forward(net, data.x);
  const DeltaStack d = delta_recursion(net, outs, loss, data.y);
  std::vector<Matrix> grads;
  grads.reserve(net.depth());
  for (std::size_t j = 0; j < net.depth(); ++j) {
    Matrix g = d.deltas[j] * outs.post[j].transpose();
    const Regularizer& reg = net.spec.regularizers[j];
    if (reg.smooth()) g += regularizer_grad(reg, net.weights[j]);
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Columns of the dataset picked by `batch`, in the given order.
inline Dataset gather(const Dataset& data, std::span<const Eigen::Index> batch) {
  if (batch.empty()) throw SpecError("empty batch");
  Dataset out{Matrix(data.x.rows(), static_cast<Eigen::Index>(batch.size())),
              Matrix(data.y.rows(), static_cast<Eigen::Index>(batch.size()))};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::Index n = batch[i];
    if (n < 0 || n >= data.size()) throw SpecError("batch index " + std::to_string(n) + " out of range");
    out.x.col(static_cast<Eigen::Index>(i)) = data.x.col(n);
    out.y.col(static_cast<Eigen::Index>(i)) = data.y.col(n);
  }
  return out;
}

/// Mini-batch gradient: the block gradient of the loss restricted to the
/// batch (normalised by |B|) plus the full regularizer gradient. With batch =
/// 0..N-1 in order this runs exactly the block_gradient arithmetic.
inline Matrix stochastic_block_gradient(const Network& net, const Dataset& data, const Loss& loss,
                                        std::size_t layer, std::span<const Eigen::Index> batch) {
  return block_gradient(net, gather(data, batch), loss, layer);
}

inline double full_gradient_norm(const Network& net, const Dataset& data, const Loss& loss) {
  double sq = 0.0;
  for (const auto& g : all_block_gradients(net, data, loss)) sq += g.squaredNorm();
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Block objective

/// f as a function of one block W_j with all other blocks frozen. Caches
/// Z_{j-1} so each evaluation only runs layers j..J.
class BlockObjective {
 public:
  BlockObjective(const Network& net, const Dataset& data, const Loss& loss, std::size_t layer)
      : net_(net), data_(data), loss_(loss), layer_(layer) {
    check_layer(net_, layer_);
    anchor_ = net_.weights[layer_];
    data_.validate();
    const LayerOutputs prefix = forward(net_, data_.x);
    z_in_ = prefix.post[layer_];
    for (std::size_t j = 0; j < net_.depth(); ++j) {
      if (j != layer_) frozen_reg_ += regularizer_value(net_.spec.regularizers[j], net_.weights[j]);
    }
  }

  std::size_t layer() const { return layer_; }
  const Matrix& anchor() const { return anchor_; }
  const Regularizer& regularizer() const { return net_.spec.regularizers[layer_]; }
  const FeasibleSet& feasible_set() const { return net_.spec.feasible_sets[layer_]; }

  /// Loss plus every smooth regularizer term (L1 on this block excluded).
  double smooth_value(const Matrix& w) const {
    const double own = regularizer().smooth() ? regularizer_value(regularizer(), w) : 0.0;
    return loss_value(loss_, output(w), data_.y) + frozen_reg_ + own;
  }

  /// Full f, L1 included.
  double value(const Matrix& w) const {
    return loss_value(loss_, output(w), data_.y) + frozen_reg_ + regularizer_value(regularizer(), w);
  }

  /// Gradient of smooth_value.
  Matrix smooth_gradient(const Matrix& w) const {
    Network& net = scratch(w);
    const LayerOutputs outs = forward_from(net, layer_, z_in_);
    const DeltaStack d = delta_recursion_from(net, layer_, outs, loss_, data_.y);
    Matrix g = d.deltas.front() * z_in_.transpose();
    if (regularizer().smooth()) g += regularizer_grad(regularizer(), w);
    return g;
  }

 private:
  Matrix output(const Matrix& w) const {
    Network& net = scratch(w);
    return forward_from(net, layer_, z_in_).post.back();
  }

  Network& scratch(const Matrix& w) const {
    require_same_shape(w, net_.weights[layer_], "block objective");
    net_.weights[layer_] = w;
    return net_;
  }

  mutable Network net_;
  Dataset data_;
  Loss loss_;
  std::size_t layer_;
  Matrix anchor_;
  Matrix z_in_;
  double frozen_reg_ = 0.0;
};

// ---------------------------------------------------------------------------
// Finite differences

/// Central differences of a scalar function of a matrix.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& w, double h) {
  if (!(h > 0.0)) throw SpecError("finite-difference step must be positive");
  Matrix g(w.rows(), w.cols());
  Matrix probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(probe);
    probe.data()[i] = orig - h;
    const double down = f(probe);
    probe.data()[i] = orig;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b||_F / max(1, ||b||_F).
inline double relative_error(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline constexpr std::size_t kMaxHessianSize = 10000;
inline constexpr double kHessianStep = 1e-5;

struct HessianResult {
  Matrix hessian;          // symmetrised
  double asymmetry = 0.0;  // max |H - H^T| before symmetrisation
};

/// Hessian of the smooth block objective in row-major vec coordinates, by
/// central differences of the analytic gradient.
inline HessianResult block_hessian_detailed(const BlockObjective& block, double h = kHessianStep) {
  const Matrix& w0 = block.anchor();
  const auto n = static_cast<std::size_t>(w0.size());
  if (n > kMaxHessianSize) {
    throw SizeError("block has " + std::to_string(n) + " entries; Hessian budget is " +
                    std::to_string(kMaxHessianSize));
  }
  if (!block.regularizer().smooth()) throw NonSmoothError("Hessian requested for an L1-regularized block");
  Matrix raw(w0.size(), w0.size());
  Matrix probe = w0;
  for (Eigen::Index i = 0; i < w0.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const Vector up = vec(block.smooth_gradient(probe));
    probe.data()[i] = orig - h;
    const Vector down = vec(block.smooth_gradient(probe));
    probe.data()[i] = orig;
    raw.col(i) = (up - down) / (2.0 * h);
  }
  HessianResult out;
  out.asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
  out.hessian = 0.5 * (raw + raw.transpose());
  return out;
}

inline Matrix block_hessian(const Network& net, const Dataset& data, const Loss& loss, std::size_t layer) {
  return block_hessian_detailed(BlockObjective(net, data, loss, layer)).hessian;
}

// ---------------------------------------------------------------------------
// Batch sampling

enum class SamplerMode { Full, FixedSize, Increasing };

struct BatchSampler {
  SamplerMode mode = SamplerMode::Full;
  std::size_t batch_size = 0;  // FixedSize only
  std::uint64_t seed = 0;

  static BatchSampler full() { return {}; }
  static BatchSampler fixed(std::size_t b, std::uint64_t seed) { return {SamplerMode::FixedSize, b, seed}; }
  static BatchSampler increasing(std::uint64_t seed) { return {SamplerMode::Increasing, 0, seed}; }

  std::string name() const {
    switch (mode) {
      case SamplerMode::Full: return "full";
      case SamplerMode::FixedSize: return "fixed";
      case SamplerMode::Increasing: return "increasing";
    }
    return "?";
  }
};

/// Draws batches without replacement. FixedSize walks a seeded permutation
/// and reshuffles when fewer than B unseen samples remain. Increasing
/// draws B_k = min(k, N) samples; once B_k = N the batch is 0..N-1 in order.
class BatchStream {
 public:
  BatchStream(const BatchSampler& sampler, Eigen::Index n) : sampler_(sampler), n_(n), rng_(sampler.seed) {
    if (n < 1) throw SpecError("sampler needs N >= 1");
    if (sampler.mode == SamplerMode::FixedSize &&
        (sampler.batch_size < 1 || static_cast<Eigen::Index>(sampler.batch_size) > n)) {
      throw SpecError("fixed batch size must satisfy 1 <= B <= N");
    }
    all_.resize(static_cast<std::size_t>(n));
    std::iota(all_.begin(), all_.end(), Eigen::Index{0});
    perm_ = all_;
    cursor_ = perm_.size();
  }

  std::size_t batch_size(std::uint64_t k) const {
    switch (sampler_.mode) {
      case SamplerMode::Full: return all_.size();
      case SamplerMode::FixedSize: return sampler_.batch_size;
      case SamplerMode::Increasing: return static_cast<std::size_t>(std::min<std::uint64_t>(k, all_.size()));
    }
    return all_.size();
  }

  /// Batch for iteration k >= 1.
  std::vector<Eigen::Index> next(std::uint64_t k) {
    const std::size_t b = batch_size(k);
    if (b == all_.size()) return all_;
    if (sampler_.mode == SamplerMode::Increasing) {
      std::vector<Eigen::Index> p = all_;
      std::shuffle(p.begin(), p.end(), rng_);
      p.resize(b);
      return p;
    }
    if (perm_.size() - cursor_ < b) {
      std::shuffle(perm_.begin(), perm_.end(), rng_);
      cursor_ = 0;
    }
    std::vector<Eigen::Index> out(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                  perm_.begin() + static_cast<std::ptrdiff_t>(cursor_ + b));
    cursor_ += b;
    return out;
  }

 private:
  BatchSampler sampler_;
  Eigen::Index n_;
  std::mt19937_64 rng_;
  std::vector<Eigen::Index> all_;
  std::vector<Eigen::Index> perm_;
  std::size_t cursor_ = 0;
};

}  // namespace bsum
