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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include "bsum/errors.hpp"
#include "bsum/matrix.hpp"

namespace bsum {

enum class ScheduleType { InverseRoot, Geometric, Recursive, Constant, Armijo };

/// Stepsize rule for the convex-combination update.
///
///   InverseRoot  a_k = c / sqrt(k)
///   Geometric    a_k = c / 2^k
///   Recursive    a_k = a_{k-1} (1 - t a_{k-1}),  a_0 given
///   Constant     a_k = c
///   Armijo       backtracking from alpha_init (see armijo_stepsize)
struct StepsizeSchedule {
  ScheduleType type = ScheduleType::InverseRoot;
  double c = 1.0;
  double alpha0 = 1.0;
  double t = 0.5;
  double shrink = 0.5;
  double slope = 1e-4;
  double alpha_init = 1.0;

  static StepsizeSchedule inverse_root(double c) { return {ScheduleType::InverseRoot, c}; }
  static StepsizeSchedule geometric(double c) { return {ScheduleType::Geometric, c}; }
  static StepsizeSchedule recursive(double alpha0, double t) {
    StepsizeSchedule s{ScheduleType::Recursive};
    s.alpha0 = alpha0;
    s.t = t;
    return s;
  }
  static StepsizeSchedule constant(double c) { return {ScheduleType::Constant, c}; }
  static StepsizeSchedule armijo(double shrink, double slope, double alpha_init) {
    StepsizeSchedule s{ScheduleType::Armijo};
    s.shrink = shrink;
    s.slope = slope;
    s.alpha_init = alpha_init;
    return s;
  }

  void validate() const {
    switch (type) {
      case ScheduleType::InverseRoot:
      case ScheduleType::Geometric:
        if (!(c > 0.0)) throw SpecError("schedule constant c must be positive");
        break;
      case ScheduleType::Recursive:
        if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw SpecError("recursive schedule needs alpha0 in (0, 1]");
        if (!(t > 0.0 && t < 1.0)) throw SpecError("recursive schedule needs t in (0, 1)");
        break;
      case ScheduleType::Constant:
        if (!(c > 0.0 && c < 1.0)) throw SpecError("constant schedule needs c in (0, 1)");
        break;
      case ScheduleType::Armijo:
        if (!(shrink > 0.0 && shrink < 1.0)) throw SpecError("Armijo shrink must lie in (0, 1)");
        if (!(slope > 0.0 && slope < 1.0)) throw SpecError("Armijo slope must lie in (0, 1)");
        if (!(alpha_init > 0.0 && alpha_init <= 1.0)) throw SpecError("Armijo alpha_init must lie in (0, 1]");
        break;
    }
  }

  std::string name() const {
    switch (type) {
      case ScheduleType::InverseRoot: return "inverse_root";
      case ScheduleType::Geometric: return "geometric";
      case ScheduleType::Recursive: return "recursive";
      case ScheduleType::Constant: return "constant";
      case ScheduleType::Armijo: return "armijo";
    }
    return "?";
  }
};

struct ScheduleState {
  double alpha = 0.0;
  bool started = false;
};

/// Largest double strictly below one; every schedule value is capped here.
inline constexpr double kMaxStepsize = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

/// Stepsize for iteration k >= 1. Recursive advances `state` once per call,
/// so the first call returns a_1 = a_0 (1 - t a_0). Armijo returns its
/// starting trial alpha_init; the trainer backtracks from there.
inline double stepsize_next(const StepsizeSchedule& s, std::uint64_t k, ScheduleState& state) {
  if (k < 1) throw SpecError("stepsize index k starts at 1");
  double a = 0.0;
  switch (s.type) {
    case ScheduleType::InverseRoot:
      a = s.c / std::sqrt(static_cast<double>(k));
      break;
    case ScheduleType::Geometric:
      a = s.c * std::exp2(-static_cast<double>(k));
      break;
    case ScheduleType::Recursive:
      if (!state.started) {
        state.alpha = s.alpha0;
        state.started = true;
      }
      state.alpha = state.alpha * (1.0 - s.t * state.alpha);
      a = state.alpha;
      break;
    case ScheduleType::Constant:
      a = s.c;
      break;
    case ScheduleType::Armijo:
      return s.alpha_init;
  }
  return std::min(std::max(a, 0.0), kMaxStepsize);
}

struct ScheduleCheck {
  bool satisfies_conditions = false;
  std::string witness;
  double partial_sum = 0.0;      // sum_{k <= 1e6} a_k
  double partial_sum_sq = 0.0;   // sum_{k <= 1e6} a_k^2
  double tail_sum_sq = 0.0;      // sum over the last half of the range
};

/// Classifies a schedule against the stepsize conditions
/// 0 <= a_k < 1, a_k -> 0, sum a_k = inf, sum a_k^2 < inf.
/// The classification is analytic; the partial sums over k <= horizon are a
/// numeric cross-check. For a summable-squares sequence the squared tail over
/// (horizon/2, horizon] vanishes; for c/sqrt(k) it stays near c^2 ln 2.
inline ScheduleCheck validate_schedule(const StepsizeSchedule& s, std::uint64_t horizon = 1000000) {
  s.validate();
  ScheduleCheck out;
  switch (s.type) {
    case ScheduleType::InverseRoot:
      out.witness = "c/sqrt(k): sum diverges but the squares c^2/k form the harmonic series, which also "
                    "diverges, so the summable-squares condition fails";
      break;
    case ScheduleType::Recursive:
      out.satisfies_conditions = true;
      out.witness = "a_{k+1} = a_k(1 - t a_k) decays like 1/(t k): divergent sum, summable squares";
      break;
    case ScheduleType::Geometric:
      out.witness = "c/2^k sums to c < inf, violating the divergent-sum condition";
      break;
    case ScheduleType::Constant:
      out.witness = "constant c does not tend to zero";
      break;
    case ScheduleType::Armijo:
      out.witness = "Armijo steps are line-search driven; the conditions are not guaranteed";
      break;
  }
  if (s.type != ScheduleType::Armijo) {
    ScheduleState state;
    for (std::uint64_t k = 1; k <= horizon; ++k) {
      const double a = stepsize_next(s, k, state);
      out.partial_sum += a;
      out.partial_sum_sq += a * a;
      if (k > horizon / 2) out.tail_sum_sq += a * a;
    }
  }
  return out;
}

struct ArmijoResult {
  double alpha = 0.0;
  int shrinks = 0;
  bool accepted = false;
};

/// Largest a = alpha_init * shrink^m with
/// f(W + a(D - W)) <= f(W) + slope * a * <grad, D - W>.
/// Returns a = 0 (not accepted) for a non-descent direction or after 60
/// shrinks.
inline ArmijoResult armijo_stepsize(const std::function<double(const Matrix&)>& f, const Matrix& w, const Matrix& d,
                                    const Matrix& grad, double shrink, double slope, double alpha_init) {
  require_same_shape(w, d, "armijo");
  const Matrix step = d - w;
  const double slope0 = frobenius_dot(grad, step);
  ArmijoResult out;
  if (!(slope0 < 0.0)) return out;
  const double f0 = f(w);
  double a = alpha_init;
  for (int m = 0; m < 60; ++m) {
    double trial = std::numeric_limits<double>::infinity();
    try {
      trial = f(w + a * step);
    } catch (const OverflowError&) {
    }
    if (trial <= f0 + slope * a * slope0) {
      out.alpha = a;
      out.shrinks = m;
      out.accepted = true;
      return out;
    }
    a *= shrink;
  }
  out.shrinks = 60;
  return out;
}

}  // namespace bsum
