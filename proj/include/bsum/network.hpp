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

// Layered network without bias terms: Z_j = Sigma_j(W_j Z_{j-1}), Z_0 = X.
// Layers are indexed 0..J-1 in code; weights[j] has shape dims[j+1] x dims[j].

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/functions.hpp"
#include "bsum/matrix.hpp"

namespace bsum {

// ---------------------------------------------------------------------------
// Feasible sets

enum class FeasibleSetType { Unconstrained, Toeplitz, FrobeniusBall };

struct FeasibleSet {
  FeasibleSetType type = FeasibleSetType::Unconstrained;
  double radius = 0.0;

  static FeasibleSet unconstrained() { return {}; }
  static FeasibleSet toeplitz() { return {FeasibleSetType::Toeplitz, 0.0}; }
  static FeasibleSet frobenius_ball(double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw SpecError("FrobeniusBall radius must be positive");
    }
    return {FeasibleSetType::FrobeniusBall, radius};
  }

  bool bounded() const { return type == FeasibleSetType::FrobeniusBall; }

  std::string name() const {
    switch (type) {
      case FeasibleSetType::Unconstrained: return "unconstrained";
      case FeasibleSetType::Toeplitz: return "toeplitz";
      case FeasibleSetType::FrobeniusBall: return "frobenius_ball";
    }
    return "?";
  }

  friend bool operator==(const FeasibleSet&, const FeasibleSet&) = default;
};

/// Largest deviation of any entry from the first entry of its diagonal.
inline double toeplitz_defect(const Matrix& w) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      const Eigen::Index shift = std::min(r, c);
      worst = std::max(worst, std::abs(w(r, c) - w(r - shift, c - shift)));
    }
  }
  return worst;
}

inline bool is_feasible(const FeasibleSet& set, const Matrix& w, double tol = 1e-12) {
  switch (set.type) {
    case FeasibleSetType::Unconstrained: return true;
    case FeasibleSetType::Toeplitz: return toeplitz_defect(w) <= tol;
    case FeasibleSetType::FrobeniusBall: return w.norm() <= set.radius + tol;
  }
  return false;
}

/// Orthogonal (Frobenius) projection onto the set. Toeplitz replaces each
/// diagonal by its mean; the mean is taken relative to the diagonal's first
/// entry so an already-constant diagonal is returned bitwise unchanged.
inline Matrix project_feasible(const FeasibleSet& set, const Matrix& w) {
  switch (set.type) {
    case FeasibleSetType::Unconstrained:
      return w;
    case FeasibleSetType::Toeplitz: {
      Matrix out(w.rows(), w.cols());
      const Eigen::Index rows = w.rows();
      const Eigen::Index cols = w.cols();
      // diagonal offset = c - r, ranging over (-(rows-1), cols-1)
      for (Eigen::Index offset = -(rows - 1); offset < cols; ++offset) {
        const Eigen::Index r0 = offset < 0 ? -offset : 0;
        const Eigen::Index c0 = offset < 0 ? 0 : offset;
        const Eigen::Index len = std::min(rows - r0, cols - c0);
        const double anchor = w(r0, c0);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < len; ++i) acc += w(r0 + i, c0 + i) - anchor;
        const double mean = anchor + acc / static_cast<double>(len);
        for (Eigen::Index i = 0; i < len; ++i) out(r0 + i, c0 + i) = mean;
      }
      return out;
    }
    case FeasibleSetType::FrobeniusBall: {
      const double norm = w.norm();
      if (norm <= set.radius) return w;
      Matrix out = w * (set.radius / norm);
      // rounding can leave the norm a few ulps above the radius
      while (out.norm() > set.radius) out *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
      return out;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Network

struct NetworkSpec {
  std::vector<std::size_t> dims;  // d_0 .. d_J
  std::vector<Activation> activations;
  std::vector<FeasibleSet> feasible_sets;
  std::vector<Regularizer> regularizers;

  std::size_t depth() const { return dims.empty() ? 0 : dims.size() - 1; }

  void validate() const {
    if (dims.size() < 2) throw SpecError("network needs at least one layer (two dims)");
    const std::size_t j = depth();
    if (activations.size() != j || feasible_sets.size() != j || regularizers.size() != j) {
      throw SpecError("activations, feasible_sets and regularizers must each have " +
                      std::to_string(j) + " entries");
    }
    for (std::size_t d : dims) {
      if (d < 1) throw SpecError("layer dimensions must be positive");
    }
    for (const auto& r : regularizers) r.validate();
  }

  /// Uniform spec: same activation, set and regularizer on every layer.
  static NetworkSpec uniform(std::vector<std::size_t> dims, Activation act,
                             Regularizer reg = Regularizer::none(),
                             FeasibleSet set = FeasibleSet::unconstrained()) {
    NetworkSpec spec;
    const std::size_t j = dims.size() < 2 ? 0 : dims.size() - 1;
    spec.dims = std::move(dims);
    spec.activations.assign(j, act);
    spec.feasible_sets.assign(j, set);
    spec.regularizers.assign(j, reg);
    return spec;
  }
};

struct Network {
  NetworkSpec spec;
  std::vector<Matrix> weights;

  std::size_t depth() const { return weights.size(); }
  std::size_t input_dim() const { return spec.dims.front(); }
  std::size_t output_dim() const { return spec.dims.back(); }
};

struct Dataset {
  Matrix x;  // d_0 x N
  Matrix y;  // d_J x N

  Eigen::Index size() const { return x.cols(); }

  void validate() const {
    if (x.cols() < 1 || x.cols() != y.cols()) {
      throw ShapeError("dataset needs X.cols == Y.cols >= 1, got " + shape_string(x) + " and " +
                       shape_string(y));
    }
  }
};

enum class InitType { Zeros, Uniform, Gaussian };

/// scale <= 0 selects the default 1/sqrt(d_{j-1}).
struct InitScheme {
  InitType type = InitType::Uniform;
  double scale = 0.0;

  static InitScheme zeros() { return {InitType::Zeros, 0.0}; }
  static InitScheme uniform(double scale = 0.0) { return {InitType::Uniform, scale}; }
  static InitScheme gaussian(double scale = 0.0) { return {InitType::Gaussian, scale}; }
};

inline Network build_network(const NetworkSpec& spec, const InitScheme& init, std::uint64_t seed) {
  spec.validate();
  Network net{spec, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < spec.depth(); ++j) {
    const auto rows = static_cast<Eigen::Index>(spec.dims[j + 1]);
    const auto cols = static_cast<Eigen::Index>(spec.dims[j]);
    const double s = init.scale > 0.0 ? init.scale : 1.0 / std::sqrt(static_cast<double>(cols));
    Matrix w = Matrix::Zero(rows, cols);
    if (init.type == InitType::Uniform) {
      std::uniform_real_distribution<double> dist(-s, s);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    } else if (init.type == InitType::Gaussian) {
      std::normal_distribution<double> dist(0.0, s);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    }
    net.weights.push_back(project_feasible(spec.feasible_sets[j], w));
  }
  return net;
}

/// Pre-activations U_j and post-activations Z_j of one forward pass.
/// post[0] is the input; pre[j] and post[j + 1] belong to layer j.
struct LayerOutputs {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

inline void check_weights(const Network& net) {
  if (net.weights.size() != net.spec.depth()) {
    throw ShapeError("network has " + std::to_string(net.weights.size()) + " weight blocks, spec says " +
                     std::to_string(net.spec.depth()));
  }
  for (std::size_t j = 0; j < net.weights.size(); ++j) {
    const auto& w = net.weights[j];
    if (w.rows() != static_cast<Eigen::Index>(net.spec.dims[j + 1]) ||
        w.cols() != static_cast<Eigen::Index>(net.spec.dims[j])) {
      throw ShapeError("weight block " + std::to_string(j) + " has shape " + shape_string(w));
    }
  }
}

/// Runs layers [first, J) starting from z_in = Z_{first}.
inline LayerOutputs forward_from(const Network& net, std::size_t first, const Matrix& z_in) {
  LayerOutputs out;
  out.post.reserve(net.depth() - first + 1);
  out.pre.reserve(net.depth() - first);
  out.post.push_back(z_in);
  for (std::size_t j = first; j < net.depth(); ++j) {
    const Matrix& w = net.weights[j];
    if (w.cols() != out.post.back().rows()) {
      throw ShapeError("layer " + std::to_string(j) + " expects " + std::to_string(w.cols()) +
                       " inputs, got " + std::to_string(out.post.back().rows()));
    }
    out.pre.push_back(w * out.post.back());
    out.post.push_back(activation_apply(net.spec.activations[j], out.pre.back()));
  }
  return out;
}

inline LayerOutputs forward(const Network& net, const Matrix& x) {
  check_weights(net);
  if (x.rows() != static_cast<Eigen::Index>(net.input_dim())) {
    throw ShapeError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                     std::to_string(net.input_dim()));
  }
  return forward_from(net, 0, x);
}

inline Matrix network_output(const Network& net, const Matrix& x) {
  return forward(net, x).post.back();
}

inline bool is_deep_linear(const NetworkSpec& spec) {
  for (const auto& a : spec.activations) {
    if (a.type() != ActivationType::Identity) return false;
  }
  return true;
}

}  // namespace bsum
