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

// Reference optimisers the block method is compared against. Both update
// every layer simultaneously from the full-batch gradient.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/gradients.hpp"
#include "bsum/network.hpp"
#include "bsum/trainer.hpp"

namespace bsum::harness {

inline constexpr double kDivergenceThreshold = 1e12;

struct BaselineConfig {
  std::uint64_t iterations = 1000;
  double grad_norm_tol = 1e-8;
  std::size_t record_every = 1;
  bool record_wall_time = false;
};

namespace detail {

inline void check_smooth(const Network& net) {
  for (const auto& r : net.spec.regularizers) {
    if (!r.smooth()) throw SpecError("baselines need smooth regularizers");
  }
}

/// `update(grads)` mutates the network weights in place.
template <class Update>
TrainResult run_full_batch(Network net, const Dataset& data, const Loss& loss, const BaselineConfig& cfg, double rate,
                           Update&& update) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] {
    return cfg.record_wall_time ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
  };
  auto record = [&](std::uint64_t k, const std::vector<Matrix>& grads) {
    TraceRecord r;
    r.k = k;
    r.f = objective(net, data, loss);
    r.normalized_mse = normalized_mse(net, data);
    double sq = 0.0;
    for (const auto& g : grads) sq += g.squaredNorm();
    r.full_grad_norm = std::sqrt(sq);
    r.alpha = k == 0 ? 0.0 : rate;
    r.wall_seconds = elapsed();
    return r;
  };

  TrainResult out;
  const std::size_t every = cfg.record_every == 0 ? 1 : cfg.record_every;
  try {
    check_smooth(net);
    std::vector<Matrix> grads = all_block_gradients(net, data, loss);
    out.trace.push_back(record(0, grads));
    for (std::uint64_t k = 1; k <= cfg.iterations; ++k) {
      update(net, grads);
      for (std::size_t j = 0; j < net.depth(); ++j) {
        net.weights[j] = project_feasible(net.spec.feasible_sets[j], net.weights[j]);
      }
      out.iterations = k;
      grads = all_block_gradients(net, data, loss);
      const TraceRecord r = record(k, grads);
      if (!std::isfinite(r.f) || r.f > kDivergenceThreshold) {
        out.trace.push_back(r);
        throw OverflowError("baseline diverged at iteration " + std::to_string(k));
      }
      const bool done = r.full_grad_norm <= cfg.grad_norm_tol;
      if (k % every == 0 || k == cfg.iterations || done) out.trace.push_back(r);
      if (done) {
        out.converged = true;
        break;
      }
    }
  } catch (const Error& e) {
    out.aborted = true;
    out.error = e.what();
  }
  out.net = std::move(net);
  return out;
}

}  // namespace detail

/// Back propagation with a constant learning rate:
/// W_j <- W_j - rate * grad_j f for all j at once.
inline TrainResult baseline_bp_clr(const Network& net, const Dataset& data, const Loss& loss, double rate,
                                   const BaselineConfig& cfg = {}) {
  if (!(rate >= 0.0)) throw SpecError("BP-CLR rate must be nonnegative");
  return detail::run_full_batch(net, data, loss, cfg, rate, [rate](Network& n, const std::vector<Matrix>& grads) {
    for (std::size_t j = 0; j < n.depth(); ++j) n.weights[j] -= rate * grads[j];
  });
}

/// ADAGRAD accumulator: G += g o g; W -= rate * g / sqrt(G + eps), entrywise.
struct AdagradState {
  double rate = 0.01;
  double eps = 1e-8;
  std::vector<Matrix> accum;

  AdagradState(const Network& net, double rate_, double eps_) : rate(rate_), eps(eps_) {
    if (!(rate > 0.0)) throw SpecError("ADAGRAD rate must be positive");
    if (!(eps > 0.0)) throw SpecError("ADAGRAD epsilon must be positive");
    for (const auto& w : net.weights) accum.push_back(Matrix::Zero(w.rows(), w.cols()));
  }

  void apply(Network& net, const std::vector<Matrix>& grads) {
    for (std::size_t j = 0; j < net.depth(); ++j) {
      accum[j].array() += grads[j].array().square();
      net.weights[j].array() -= rate * grads[j].array() / (accum[j].array() + eps).sqrt();
    }
  }
};

inline TrainResult baseline_adagrad(const Network& net, const Dataset& data, const Loss& loss, double rate,
                                    double eps = 1e-8, const BaselineConfig& cfg = {}) {
  AdagradState state(net, rate, eps);
  return detail::run_full_batch(net, data, loss, cfg, rate,
                                [&state](Network& n, const std::vector<Matrix>& grads) { state.apply(n, grads); });
}

}  // namespace bsum::harness
