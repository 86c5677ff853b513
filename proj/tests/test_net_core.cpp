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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bsum/network.hpp"
#include "oracles.hpp"

namespace {

using bsum::Activation;
using bsum::FeasibleSet;
using bsum::InitScheme;
using bsum::Matrix;
using bsum::NetworkSpec;

TEST(BuildNetwork, ZerosInit) {
  const auto net = bsum::build_network(NetworkSpec::uniform({2, 2}, Activation::identity()), InitScheme::zeros(), 1);
  ASSERT_EQ(net.weights.size(), 1u);
  EXPECT_EQ(net.weights[0], Matrix::Zero(2, 2));
}

TEST(BuildNetwork, ToeplitzProjectionApplied) {
  const auto spec = NetworkSpec::uniform({4, 3}, Activation::tanh(), bsum::Regularizer::none(), FeasibleSet::toeplitz());
  const auto net = bsum::build_network(spec, InitScheme::gaussian(), 7);
  EXPECT_TRUE(bsum::is_feasible(FeasibleSet::toeplitz(), net.weights[0]));
  EXPECT_LE(bsum::toeplitz_defect(net.weights[0]), 1e-12);
}

TEST(BuildNetwork, Deterministic) {
  const auto spec = NetworkSpec::uniform({5, 4, 3}, Activation::logistic());
  const auto a = bsum::build_network(spec, InitScheme::uniform(), 42);
  const auto b = bsum::build_network(spec, InitScheme::uniform(), 42);
  const auto c = bsum::build_network(spec, InitScheme::uniform(), 43);
  for (std::size_t j = 0; j < a.weights.size(); ++j) EXPECT_EQ(a.weights[j], b.weights[j]);
  EXPECT_NE(a.weights[0], c.weights[0]);
}

TEST(BuildNetwork, DefaultUniformScale) {
  const auto net = bsum::build_network(NetworkSpec::uniform({16, 50}, Activation::identity()), InitScheme::uniform(), 3);
  EXPECT_LE(net.weights[0].cwiseAbs().maxCoeff(), 0.25);
  EXPECT_GT(net.weights[0].cwiseAbs().maxCoeff(), 0.2);
}

TEST(BuildNetwork, InconsistentSpec) {
  NetworkSpec spec = NetworkSpec::uniform({3, 2, 1}, Activation::identity());
  spec.activations.pop_back();
  EXPECT_THROW(bsum::build_network(spec, InitScheme::zeros(), 0), bsum::SpecError);
  NetworkSpec empty;
  EXPECT_THROW(bsum::build_network(empty, InitScheme::zeros(), 0), bsum::SpecError);
  NetworkSpec zero_dim = NetworkSpec::uniform({3, 0}, Activation::identity());
  EXPECT_THROW(bsum::build_network(zero_dim, InitScheme::zeros(), 0), bsum::SpecError);
}

TEST(BuildNetwork, BallFeasible) {
  const auto spec = NetworkSpec::uniform({10, 10, 10}, Activation::tanh(), bsum::Regularizer::none(),
                                         FeasibleSet::frobenius_ball(0.5));
  const auto net = bsum::build_network(spec, InitScheme::gaussian(3.0), 11);
  for (const auto& w : net.weights) EXPECT_LE(w.norm(), 0.5 + 1e-12);
}

TEST(FeasibleSetTest, RadiusMustBePositive) {
  EXPECT_THROW(FeasibleSet::frobenius_ball(0.0), bsum::SpecError);
  EXPECT_THROW(FeasibleSet::frobenius_ball(-1.0), bsum::SpecError);
}

TEST(Forward, IdentityComposition) {
  bsum::Network net{NetworkSpec::uniform({3, 3, 3}, Activation::identity()),
                    {Matrix::Identity(3, 3), Matrix::Identity(3, 3)}};
  std::mt19937_64 rng(5);
  const Matrix x = oracle::gaussian(3, 4, rng);
  EXPECT_EQ(bsum::network_output(net, x), x);
}

TEST(Forward, ZeroLogisticIsHalf) {
  bsum::Network net{NetworkSpec::uniform({4, 2}, Activation::logistic()), {Matrix::Zero(2, 4)}};
  std::mt19937_64 rng(5);
  const Matrix z = bsum::network_output(net, oracle::gaussian(4, 3, rng));
  EXPECT_TRUE((z.array() == 0.5).all());
}

TEST(Forward, MatchesScalarLoopOracle) {
  const std::vector<Activation> acts{Activation::tanh(), Activation::softplus(), Activation::logistic(),
                                     Activation::leaky_relu_smooth(0.2), Activation::bent_identity()};
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkSpec spec = NetworkSpec::uniform({4, 5, 3, 2}, Activation::identity());
    for (auto& a : spec.activations) a = acts[rng() % acts.size()];
    const auto net = bsum::build_network(spec, InitScheme::gaussian(), rng());
    const Matrix x = oracle::gaussian(4, 3, rng);
    const bsum::LayerOutputs outs = bsum::forward(net, x);
    const Matrix expected = oracle::forward(net.weights, spec.activations, x);
    EXPECT_LE((outs.output() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(bsum::network_output(net, x), outs.output());
  }
}

TEST(Forward, ShapePropagation) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t depth = 1 + rng() % 4;
    std::vector<std::size_t> dims;
    for (std::size_t j = 0; j <= depth; ++j) dims.push_back(1 + rng() % 6);
    const auto net = bsum::build_network(NetworkSpec::uniform(dims, Activation::tanh()), InitScheme::uniform(), rng());
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 5);
    const auto outs = bsum::forward(net, oracle::gaussian(static_cast<Eigen::Index>(dims[0]), n, rng));
    ASSERT_EQ(outs.pre.size(), depth);
    ASSERT_EQ(outs.post.size(), depth + 1);
    for (std::size_t j = 0; j < depth; ++j) {
      EXPECT_EQ(outs.pre[j].rows(), static_cast<Eigen::Index>(dims[j + 1]));
      EXPECT_EQ(outs.pre[j].cols(), n);
      EXPECT_EQ(outs.post[j + 1].rows(), static_cast<Eigen::Index>(dims[j + 1]));
      for (Eigen::Index i = 0; i < outs.pre[j].size(); ++i) {
        EXPECT_EQ(outs.post[j + 1].data()[i], net.spec.activations[j].value(outs.pre[j].data()[i]));
      }
    }
  }
}

TEST(Forward, Deterministic) {
  std::mt19937_64 rng(2);
  const auto net = bsum::build_network(NetworkSpec::uniform({6, 4, 2}, Activation::softplus()), InitScheme::gaussian(), 9);
  const Matrix x = oracle::gaussian(6, 10, rng);
  EXPECT_EQ(bsum::network_output(net, x), bsum::network_output(net, x));
}

TEST(Forward, BoundedActivationsStayBounded) {
  std::mt19937_64 rng(4);
  for (auto act : {Activation::logistic(), Activation::tanh()}) {
    const auto net = bsum::build_network(NetworkSpec::uniform({5, 8, 8, 3}, act), InitScheme::gaussian(100.0), 1);
    const auto outs = bsum::forward(net, oracle::gaussian(5, 20, rng, 50.0));
    for (std::size_t j = 1; j < outs.post.size(); ++j) EXPECT_LE(outs.post[j].cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Forward, DimensionMismatch) {
  const auto net = bsum::build_network(NetworkSpec::uniform({3, 2}, Activation::identity()), InitScheme::zeros(), 0);
  EXPECT_THROW(bsum::forward(net, Matrix::Zero(4, 2)), bsum::ShapeError);
  bsum::Network bad = net;
  bad.weights[0] = Matrix::Zero(2, 2);
  EXPECT_THROW(bsum::forward(bad, Matrix::Zero(3, 2)), bsum::ShapeError);
}

TEST(Projection, ToeplitzIsIdempotentAndOrthogonal) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix w = oracle::gaussian(1 + rng() % 6, 1 + rng() % 6, rng);
    const Matrix p = bsum::project_feasible(FeasibleSet::toeplitz(), w);
    EXPECT_LE(bsum::toeplitz_defect(p), 1e-12);
    EXPECT_EQ(bsum::project_feasible(FeasibleSet::toeplitz(), p), p);
    // residual orthogonal to a Toeplitz direction
    const Matrix t = bsum::project_feasible(FeasibleSet::toeplitz(), oracle::gaussian(w.rows(), w.cols(), rng));
    EXPECT_NEAR(bsum::frobenius_dot(w - p, t), 0.0, 1e-10);
  }
}

TEST(Projection, ToeplitzDiagonalMeans) {
  Matrix w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  Matrix expected(2, 3);
  expected << 3, 4, 3, 4, 3, 4;
  EXPECT_LE((bsum::project_feasible(FeasibleSet::toeplitz(), w) - expected).cwiseAbs().maxCoeff(), 1e-15);
  Matrix sq(2, 2);
  sq << 1, 2, 3, 4;
  Matrix sq_expected(2, 2);
  sq_expected << 2.5, 2, 3, 2.5;
  EXPECT_EQ(bsum::project_feasible(FeasibleSet::toeplitz(), sq), sq_expected);
}

TEST(Projection, BallScalesOnlyOutside) {
  Matrix w(1, 2);
  w << 3, 4;
  const Matrix p = bsum::project_feasible(FeasibleSet::frobenius_ball(1.0), w);
  EXPECT_LE(p.norm(), 1.0);
  EXPECT_NEAR(p(0, 0), 0.6, 1e-15);
  const Matrix two = 2.0 * Matrix::Identity(2, 2) / std::sqrt(2.0);
  EXPECT_NEAR(bsum::project_feasible(FeasibleSet::frobenius_ball(1.0), two).norm(), 1.0, 1e-15);
  const Matrix inside = w / 10.0;
  EXPECT_EQ(bsum::project_feasible(FeasibleSet::frobenius_ball(1.0), inside), inside);
}

}  // namespace
