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

// Cyclic block-successive upperbound minimisation.
//
// Iteration k >= 1 updates block j = (k - 1) mod J:
//   1. minimise the block upperbound g_j(.; W_bar^(k)) over W_j -> D_j
//   2. pick a stepsize a_k
//   3. W_j <- (1 - a_k) W_j + a_k D_j
//
// Gradient descent, back propagation and damped Newton are configurations:
// first-order bound with gamma = 1 and a schedule is BP with learning rate
// a_k; first-order with unit stepsize is gradient descent with step
// 1/gamma; second-order with unit stepsize is Levenberg-Marquardt.

#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/functions.hpp"
#include "bsum/gradients.hpp"
#include "bsum/matrix.hpp"
#include "bsum/network.hpp"
#include "bsum/schedules.hpp"
#include "bsum/upperbounds.hpp"

namespace bsum {

enum class GammaMode { Backtracking, Fixed };

struct TrainConfig {
  std::vector<UpperboundKind> upperbounds{UpperboundKind::first_order(1.0)};  // one shared or one per layer
  std::vector<StepsizeSchedule> schedules{StepsizeSchedule::inverse_root(1.0)};  // empty iff unit step
  BatchSampler sampler{};
  std::uint64_t max_iterations = 1000;  // block updates, J per cycle
  double grad_norm_tol = 1e-8;
  std::size_t record_every = 0;  // 0 -> J
  bool unit_stepsize = false;
  bool exact_bcd = false;
  GammaMode gamma_mode = GammaMode::Backtracking;
  bool allow_heuristic = false;  // proximal on unclassified blocks, linear on non-concave ones
  bool record_wall_time = false;

  static TrainConfig with(UpperboundKind ub, std::optional<StepsizeSchedule> schedule) {
    TrainConfig cfg;
    cfg.upperbounds = {ub};
    if (schedule) {
      cfg.schedules = {*schedule};
    } else {
      cfg.schedules.clear();
      cfg.unit_stepsize = true;
    }
    return cfg;
  }

  const UpperboundKind& upperbound(std::size_t layer) const {
    return upperbounds.size() == 1 ? upperbounds.front() : upperbounds.at(layer);
  }

  std::size_t record_interval(std::size_t depth) const { return record_every == 0 ? depth : record_every; }

  void validate(const NetworkSpec& spec) const {
    const std::size_t depth = spec.depth();
    if (upperbounds.size() != 1 && upperbounds.size() != depth) {
      throw SpecError("upperbounds must be shared (1) or per layer (" + std::to_string(depth) + ")");
    }
    for (const auto& ub : upperbounds) ub.validate();
    const bool fixed_step = unit_stepsize || exact_bcd;
    if (fixed_step && !schedules.empty()) throw SpecError("unit stepsize and a schedule are mutually exclusive");
    if (!fixed_step && schedules.size() != 1 && schedules.size() != depth) {
      throw SpecError("schedules must be shared (1) or per layer (" + std::to_string(depth) + ")");
    }
    for (const auto& s : schedules) s.validate();
    if (max_iterations < 1) throw SpecError("max_iterations must be positive");
    if (!(grad_norm_tol > 0.0)) throw SpecError("grad_norm_tol must be positive");
    for (std::size_t j = 0; j < depth; ++j) {
      const Regularizer& reg = spec.regularizers[j];
      if (reg.type == RegularizerType::L1) {
        if (upperbound(j).type != UpperboundType::FirstOrderProx) {
          throw SpecError("L1-regularized layers need the first-order upperbound");
        }
        if (spec.feasible_sets[j].type != FeasibleSetType::Unconstrained) {
          throw SpecError("L1 regularization on a constrained layer is not supported");
        }
        for (const auto& s : schedules) {
          if (s.type == ScheduleType::Armijo) throw SpecError("Armijo stepsizes need smooth regularizers");
        }
      }
    }
    if (exact_bcd) {
      if (!is_deep_linear(spec)) throw SpecError("exact_bcd needs a deep linear network");
      for (std::size_t j = 0; j < depth; ++j) {
        if (spec.regularizers[j].type == RegularizerType::L1 ||
            spec.feasible_sets[j].type != FeasibleSetType::Unconstrained) {
          throw SpecError("exact_bcd needs unconstrained layers with L2 or no regularization");
        }
      }
    }
  }
};

/// One point of a training curve. block is 1-based; the k = 0 record is the
/// initial state and has block 0.
struct TraceRecord {
  std::uint64_t k = 0;
  std::size_t block = 0;
  double f = 0.0;
  double normalized_mse = 0.0;
  double block_grad_norm = 0.0;
  double full_grad_norm = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using TrainTrace = std::vector<TraceRecord>;

/// What one block update did.
struct StepRecord {
  std::uint64_t k = 0;
  std::size_t layer = 0;     // 0-based
  double alpha = 0.0;
  double gamma = 0.0;
  double anchor_f = 0.0;     // smooth block objective at the anchor
  double block_grad_norm = 0.0;
  double f_at_direction = 0.0;      // smooth block objective at D
  double bound_at_direction = 0.0;  // g_j(D; anchor), NaN when not evaluated
  std::size_t inner_iterations = 0;
  bool heuristic = false;
};

/// Full-batch norm of all block gradients. L1 layers contribute their
/// unit-step proximal gradient mapping W - prox(W - grad).
inline double stationarity_norm(const Network& net, const Dataset& data, const Loss& loss) {
  const auto grads = all_block_gradients(net, data, loss);
  double sq = 0.0;
  for (std::size_t j = 0; j < grads.size(); ++j) {
    const Regularizer& reg = net.spec.regularizers[j];
    if (reg.smooth()) {
      sq += grads[j].squaredNorm();
    } else {
      sq += (net.weights[j] - prox_l1_step(net.weights[j], grads[j], 1.0, reg.lambda)).squaredNorm();
    }
  }
  return std::sqrt(sq);
}

inline BlockCurvature block_curvature(const NetworkSpec& spec, const Loss& loss, std::size_t layer) {
  std::vector<Activation> downstream(spec.activations.begin() + static_cast<std::ptrdiff_t>(layer),
                                     spec.activations.end());
  return classify_convexity(loss, downstream, spec.regularizers[layer]);
}

/// Stateful driver for the cyclic block loop. Owns the network being trained, the
/// stepsize schedule states and the batch stream.
class Trainer {
 public:
  Trainer(Network net, const Dataset& data, const Loss& loss, TrainConfig cfg, bool use_batches = false)
      : net_(std::move(net)),
        data_(data),
        loss_(loss),
        cfg_(std::move(cfg)),
        use_batches_(use_batches || cfg_.sampler.mode != SamplerMode::Full),
        stream_(cfg_.sampler, data.size()) {
    check_weights(net_);
    data_.validate();
    cfg_.validate(net_.spec);
    if (use_batches_) {
      for (std::size_t j = 0; j < net_.depth(); ++j) {
        if (cfg_.upperbound(j).type != UpperboundType::FirstOrderProx) {
          throw SpecError("mini-batch training is defined for the first-order upperbound only");
        }
      }
    }
    states_.resize(cfg_.schedules.size());
  }

  const Network& network() const { return net_; }
  Network& network() { return net_; }
  std::uint64_t iteration() const { return k_; }
  const TrainConfig& config() const { return cfg_; }

  /// Makes the next step() run iteration k + 1 without touching weights.
  void seek(std::uint64_t k) { k_ = k; }

  /// Runs iteration k_ + 1.
  StepRecord step() {
    const std::uint64_t k = ++k_;
    const std::size_t j = static_cast<std::size_t>((k - 1) % net_.depth());
    if (use_batches_) {
      const auto batch = stream_.next(k);
      return update_block(k, j, gather(data_, batch));
    }
    return update_block(k, j, data_);
  }

 private:
  double next_alpha(std::uint64_t k, std::size_t j, const BlockObjective& block, const Matrix& w, const Matrix& d,
                    const Matrix& grad) {
    if (cfg_.unit_stepsize || cfg_.exact_bcd) return 1.0;
    const std::size_t idx = cfg_.schedules.size() == 1 ? 0 : j;
    const StepsizeSchedule& s = cfg_.schedules[idx];
    if (s.type == ScheduleType::Armijo) {
      const auto r = armijo_stepsize([&block](const Matrix& v) { return block.smooth_value(v); }, w, d, grad,
                                     s.shrink, s.slope, s.alpha_init);
      return std::min(r.alpha, kMaxStepsize);
    }
    return stepsize_next(s, k, states_[idx]);
  }

  StepRecord update_block(std::uint64_t k, std::size_t j, const Dataset& data) {
    StepRecord rec;
    rec.k = k;
    rec.layer = j;
    rec.bound_at_direction = std::numeric_limits<double>::quiet_NaN();

    const BlockObjective block(net_, data, loss_, j);
    const Matrix& w = net_.weights[j];
    const FeasibleSet& set = net_.spec.feasible_sets[j];
    const Regularizer& reg = net_.spec.regularizers[j];
    const UpperboundKind& kind = cfg_.upperbound(j);

    UpperboundAnchor anchor;
    anchor.w = w;
    anchor.f = block.smooth_value(w);
    anchor.grad = block.smooth_gradient(w);
    rec.anchor_f = anchor.f;
    rec.block_grad_norm = anchor.grad.norm();

    Matrix d;
    const bool backtrack = cfg_.gamma_mode == GammaMode::Backtracking;
    if (cfg_.exact_bcd) {
      d = closed_form_linear_block(net_, data, j, reg.lambda);
      rec.gamma = 0.0;
    } else {
      switch (kind.type) {
        case UpperboundType::FirstOrderProx: {
          auto solve = [&](double gamma) {
            return reg.smooth() ? descent_direction_first_order(w, anchor.grad, gamma, set)
                                : prox_l1_step(w, anchor.grad, gamma, reg.lambda);
          };
          if (backtrack) {
            auto r = backtrack_gamma(kind, block, anchor, solve);
            d = std::move(r.direction);
            rec.gamma = r.gamma;
          } else {
            d = solve(kind.gamma);
            rec.gamma = kind.gamma;
          }
          break;
        }
        case UpperboundType::SecondOrderProx: {
          anchor.hess = block_hessian_detailed(block).hessian;
          // smallest damping that makes H + gamma I positive definite
          const double gamma0 = descent_direction_second_order(w, anchor.grad, *anchor.hess, kind.gamma).gamma;
          auto solve = [&](double gamma) {
            return project_feasible(set, descent_direction_second_order(w, anchor.grad, *anchor.hess, gamma).direction);
          };
          rec.heuristic = set.type == FeasibleSetType::FrobeniusBall;
          if (backtrack) {
            UpperboundKind start = kind;
            start.gamma = gamma0;
            auto r = backtrack_gamma(start, block, anchor, solve);
            d = std::move(r.direction);
            rec.gamma = r.gamma;
          } else {
            d = solve(gamma0);
            rec.gamma = gamma0;
          }
          break;
        }
        case UpperboundType::Proximal: {
          const BlockCurvature curv = block_curvature(net_.spec, loss_, j);
          if (curv.kind != CurvatureClass::StronglyConvex) {
            if (!cfg_.allow_heuristic) {
              throw CurvatureError("proximal upperbound on layer " + std::to_string(j) +
                                   " whose block objective is not known to be strongly convex");
            }
            rec.heuristic = true;
          }
          auto r = descent_direction_proximal(SmoothFunction::of(block), w, kind.gamma, set, kind.inner);
          d = std::move(r.direction);
          rec.inner_iterations = r.iterations;
          rec.gamma = kind.gamma;
          anchor.block_value = [&block](const Matrix& v) { return block.smooth_value(v); };
          break;
        }
        case UpperboundType::Linear: {
          const BlockCurvature curv = block_curvature(net_.spec, loss_, j);
          d = project_feasible(set, descent_direction_linear(w, anchor.grad, curv, set, cfg_.allow_heuristic));
          rec.heuristic = curv.kind != CurvatureClass::Concave && !set.bounded();
          rec.gamma = 0.0;
          break;
        }
      }
    }

    rec.f_at_direction = block.smooth_value(d);
    if (!cfg_.exact_bcd) {
      UpperboundKind used = kind;
      used.gamma = rec.gamma;
      rec.bound_at_direction = evaluate_upperbound(used, d, anchor);
    }

    const double alpha = next_alpha(k, j, block, w, d, anchor.grad);
    rec.alpha = alpha;
    if (alpha == 1.0) {
      net_.weights[j] = std::move(d);
    } else if (alpha != 0.0) {
      Matrix next = (1.0 - alpha) * w + alpha * d;
      net_.weights[j] = std::move(next);
    }
    return rec;
  }

  Network net_;
  Dataset data_;
  Loss loss_;
  TrainConfig cfg_;
  bool use_batches_;
  BatchStream stream_;
  std::vector<ScheduleState> states_;
  std::uint64_t k_ = 0;
};

struct TrainResult {
  Network net;
  TrainTrace trace;
  std::uint64_t iterations = 0;
  bool converged = false;
  bool aborted = false;
  std::string error;
};

namespace detail {

inline TraceRecord snapshot(const Network& net, const Dataset& data, const Loss& loss, std::uint64_t k,
                            double full_grad_norm) {
  TraceRecord r;
  r.k = k;
  r.f = objective(net, data, loss);
  r.normalized_mse = normalized_mse(net, data);
  r.full_grad_norm = full_grad_norm;
  return r;
}

inline TrainResult run_trainer(Trainer& trainer, const Dataset& data, const Loss& loss) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const TrainConfig& cfg = trainer.config();
  const std::size_t depth = trainer.network().depth();
  const std::size_t every = cfg.record_interval(depth);
  auto elapsed = [&] {
    return cfg.record_wall_time ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
  };

  TrainResult out;
  try {
    TraceRecord first = snapshot(trainer.network(), data, loss, 0, stationarity_norm(trainer.network(), data, loss));
    first.wall_seconds = elapsed();
    out.trace.push_back(first);
    StepRecord last;
    while (trainer.iteration() < cfg.max_iterations) {
      last = trainer.step();
      const std::uint64_t k = trainer.iteration();
      const bool cycle_end = k % depth == 0;
      const bool record = k % every == 0 || k == cfg.max_iterations;
      if (!cycle_end && !record) continue;
      const double gnorm = stationarity_norm(trainer.network(), data, loss);
      const bool done = cycle_end && gnorm <= cfg.grad_norm_tol;
      if (record || done) {
        TraceRecord r = snapshot(trainer.network(), data, loss, k, gnorm);
        r.block = last.layer + 1;
        r.alpha = last.alpha;
        r.gamma = last.gamma;
        r.block_grad_norm = last.block_grad_norm;
        r.wall_seconds = elapsed();
        out.trace.push_back(r);
      }
      if (done) {
        out.converged = true;
        break;
      }
    }
  } catch (const Error& e) {
    out.aborted = true;
    out.error = e.what();
  }
  out.iterations = trainer.iteration();
  out.net = trainer.network();
  return out;
}

}  // namespace detail

/// Cyclic block updates until max_iterations or until the full gradient norm, checked
/// at the end of every cycle, falls to grad_norm_tol. Library errors abort
/// the run and are reported in the result together with the partial trace.
inline TrainResult train(const Network& net, const Dataset& data, const Loss& loss, const TrainConfig& cfg) {
  Trainer trainer(net, data, loss, cfg);
  return detail::run_trainer(trainer, data, loss);
}

/// Mini-batch variant: each block update uses the gradient of the loss on
/// the sampled batch. First-order upperbound only.
inline TrainResult stochastic_train(const Network& net, const Dataset& data, const Loss& loss,
                                    const TrainConfig& cfg) {
  Trainer trainer(net, data, loss, cfg, /*use_batches=*/true);
  return detail::run_trainer(trainer, data, loss);
}

/// Single update of iteration k on a copy of `net`. Stateful schedules
/// (Recursive) start from their initial value; use Trainer to carry state.
struct StepResult {
  Network net;
  StepRecord record;
};

inline StepResult train_step(const Network& net, const Dataset& data, const Loss& loss, const TrainConfig& cfg,
                             std::uint64_t k) {
  if (k < 1) throw SpecError("iteration index k starts at 1");
  TrainConfig single = cfg;
  single.sampler = BatchSampler::full();
  Trainer trainer(net, data, loss, single);
  trainer.seek(k - 1);
  StepRecord rec = trainer.step();
  return {trainer.network(), rec};
}

}  // namespace bsum
