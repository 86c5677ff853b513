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

// JSON experiment configs and the experiment runner behind `bsum train`.
//
// A config names a dataset (CSV or synthetic teacher), a network, a loss,
// any number of block-method variants and baselines, and a list of seeds.
// Each (method, seed) run writes <method>_seed<seed>.csv (curve file) and
// <method>_seed<seed>.json (summary) into the output directory. Unknown keys
// anywhere in the config are rejected.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bsum/errors.hpp"
#include "bsum/functions.hpp"
#include "bsum/harness/baselines.hpp"
#include "bsum/harness/curves.hpp"
#include "bsum/harness/dataset.hpp"
#include "bsum/network.hpp"
#include "bsum/schedules.hpp"
#include "bsum/trainer.hpp"
#include "bsum/upperbounds.hpp"

namespace bsum::harness {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Parsing helpers

namespace config {

inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const Json& obj, const char* key, T fallback, const std::string& where) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

inline std::string kind_of(const Json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("kind")) return get<std::string>(j, "kind", where);
  throw ConfigError(where + ": expected a name or an object with 'kind'");
}

inline Activation parse_activation(const Json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (j.is_object()) check_keys(j, {"kind", "alpha"}, where);
  if (kind == "identity") return Activation::identity();
  if (kind == "logistic") return Activation::logistic();
  if (kind == "tanh") return Activation::tanh();
  if (kind == "softplus") return Activation::softplus();
  if (kind == "bent_identity") return Activation::bent_identity();
  if (kind == "leaky_relu_smooth") {
    const double alpha = j.is_object() ? get_or<double>(j, "alpha", 0.1, where) : 0.1;
    try {
      return Activation::leaky_relu_smooth(alpha);
    } catch (const SpecError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  throw ConfigError(where + ": unknown activation '" + kind + "'");
}

inline Loss parse_loss(const Json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (j.is_object()) check_keys(j, {"kind", "c"}, where);
  const double c = j.is_object() ? get_or<double>(j, "c", 1.0, where) : 1.0;
  if (!(c > 0.0)) throw ConfigError(where + ": loss constant c must be positive");
  if (kind == "l2") return Loss::l2();
  if (kind == "exponential") return Loss::exponential(c);
  if (kind == "cross_entropy") return Loss::cross_entropy();
  if (kind == "squared_hinge") return Loss::squared_hinge(c);
  if (kind == "logistic") return Loss::logistic();
  throw ConfigError(where + ": unknown loss '" + kind + "'");
}

inline Regularizer parse_regularizer(const Json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (j.is_object()) check_keys(j, {"kind", "lambda"}, where);
  const double lambda = j.is_object() ? get_or<double>(j, "lambda", 0.0, where) : 0.0;
  if (!(lambda >= 0.0)) throw ConfigError(where + ": lambda must be nonnegative");
  if (kind == "none") return Regularizer::none();
  if (kind == "l2") return Regularizer::l2(lambda);
  if (kind == "l1") return Regularizer::l1(lambda);
  throw ConfigError(where + ": unknown regularizer '" + kind + "'");
}

inline FeasibleSet parse_feasible_set(const Json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (j.is_object()) check_keys(j, {"kind", "radius"}, where);
  if (kind == "unconstrained") return FeasibleSet::unconstrained();
  if (kind == "toeplitz") return FeasibleSet::toeplitz();
  if (kind == "frobenius_ball") {
    const double r = j.is_object() ? get<double>(j, "radius", where) : 0.0;
    if (!(r > 0.0)) throw ConfigError(where + ": radius must be positive");
    return FeasibleSet::frobenius_ball(r);
  }
  throw ConfigError(where + ": unknown feasible set '" + kind + "'");
}

inline InitScheme parse_init(const Json& j, const std::string& where) {
  check_keys(j, {"scheme", "scale"}, where);
  const std::string scheme = get_or<std::string>(j, "scheme", "uniform", where);
  const double scale = get_or<double>(j, "scale", 0.0, where);
  if (scheme == "zeros") return InitScheme::zeros();
  if (scheme == "uniform") return InitScheme::uniform(scale);
  if (scheme == "gaussian") return InitScheme::gaussian(scale);
  throw ConfigError(where + ": unknown init scheme '" + scheme + "'");
}

inline UpperboundKind parse_upperbound(const Json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (j.is_object()) check_keys(j, {"kind", "gamma", "inner"}, where);
  const double gamma = j.is_object() ? get_or<double>(j, "gamma", 1.0, where) : 1.0;
  if (kind == "linear") return UpperboundKind::linear();
  if (!(gamma > 0.0)) throw ConfigError(where + ": gamma must be positive");
  if (kind == "first_order") return UpperboundKind::first_order(gamma);
  if (kind == "second_order") return UpperboundKind::second_order(gamma);
  if (kind == "proximal") {
    InnerSolverConfig inner;
    if (j.is_object() && j.contains("inner")) {
      const Json& in = j.at("inner");
      const std::string w = where + ".inner";
      check_keys(in, {"max_iters", "grad_tol", "shrink", "slope"}, w);
      inner.max_iters = get_or<std::size_t>(in, "max_iters", inner.max_iters, w);
      inner.grad_tol = get_or<double>(in, "grad_tol", inner.grad_tol, w);
      inner.shrink = get_or<double>(in, "shrink", inner.shrink, w);
      inner.slope = get_or<double>(in, "slope", inner.slope, w);
    }
    return UpperboundKind::proximal(gamma, inner);
  }
  throw ConfigError(where + ": unknown upperbound '" + kind + "'");
}

inline StepsizeSchedule parse_schedule(const Json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (j.is_object()) check_keys(j, {"kind", "c", "alpha0", "t", "shrink", "slope", "alpha_init"}, where);
  auto num = [&](const char* key, double fallback) {
    return j.is_object() ? get_or<double>(j, key, fallback, where) : fallback;
  };
  StepsizeSchedule s;
  if (kind == "inverse_root") {
    s = StepsizeSchedule::inverse_root(num("c", 1.0));
  } else if (kind == "geometric") {
    s = StepsizeSchedule::geometric(num("c", 1.0));
  } else if (kind == "recursive") {
    s = StepsizeSchedule::recursive(num("alpha0", 1.0), num("t", 0.99));
  } else if (kind == "constant") {
    s = StepsizeSchedule::constant(num("c", 0.1));
  } else if (kind == "armijo") {
    s = StepsizeSchedule::armijo(num("shrink", 0.5), num("slope", 1e-4), num("alpha_init", 1.0));
  } else {
    throw ConfigError(where + ": unknown schedule '" + kind + "'");
  }
  try {
    s.validate();
  } catch (const SpecError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

inline BatchSampler parse_sampler(const Json& j, const std::string& where) {
  check_keys(j, {"mode", "batch_size"}, where);
  const std::string mode = get_or<std::string>(j, "mode", "full", where);
  if (mode == "full") return BatchSampler::full();
  if (mode == "increasing") return BatchSampler::increasing(0);
  if (mode == "fixed") return BatchSampler::fixed(get<std::size_t>(j, "batch_size", where), 0);
  throw ConfigError(where + ": unknown sampler mode '" + mode + "'");
}

/// A single value for every layer, or a list with one entry per layer.
template <class T, class Parse>
std::vector<T> per_layer(const Json& root, const char* single, const char* plural, std::size_t depth, T fallback,
                         Parse parse, const std::string& where) {
  if (root.contains(single) && root.contains(plural)) {
    throw ConfigError(where + ": give either '" + single + "' or '" + plural + "', not both");
  }
  if (root.contains(plural)) {
    const Json& list = root.at(plural);
    if (!list.is_array() || list.size() != depth) {
      throw ConfigError(where + "." + plural + ": expected " + std::to_string(depth) + " entries");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < depth; ++i) {
      out.push_back(parse(list[i], where + "." + plural + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  if (root.contains(single)) return std::vector<T>(depth, parse(root.at(single), where + "." + single));
  return std::vector<T>(depth, fallback);
}

}  // namespace config

// ---------------------------------------------------------------------------
// Config types

struct CsvSource {
  std::string path;
  std::vector<std::string> targets;
  bool standardize = true;
};

struct SyntheticSource {
  std::size_t n = 252;
  std::uint64_t seed = 0;
  TeacherSpec teacher = default_teacher();
};

struct MethodConfig {
  std::string name;
  TrainConfig train;
};

enum class BaselineType { BpClr, Adagrad };

struct BaselineSpec {
  BaselineType type = BaselineType::BpClr;
  std::string name;
  double rate = 0.01;
  double eps = 1e-8;
};

struct ExperimentConfig {
  std::variant<CsvSource, SyntheticSource> dataset = SyntheticSource{};
  NetworkSpec network;
  InitScheme init = InitScheme::uniform();
  Loss loss = Loss::l2();
  std::vector<MethodConfig> methods;
  std::vector<BaselineSpec> baselines;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  bool record_wall_time = false;

  void validate() const {
    if (methods.empty() && baselines.empty()) throw ConfigError("config needs at least one method or baseline");
    if (seeds.empty()) throw ConfigError("config needs at least one seed");
    try {
      network.validate();
      for (const auto& m : methods) m.train.validate(network);
    } catch (const SpecError& e) {
      throw ConfigError(e.what());
    }
    std::set<std::string> names;
    for (const auto& m : methods) {
      check_method_name(m.name);
      if (!names.insert(m.name).second) throw ConfigError("duplicate method name '" + m.name + "'");
    }
    for (const auto& b : baselines) {
      check_method_name(b.name);
      if (!names.insert(b.name).second) throw ConfigError("duplicate method name '" + b.name + "'");
    }
  }
};

inline ExperimentConfig parse_experiment_config(const Json& root) {
  using namespace config;
  check_keys(root, {"dataset", "network", "loss", "train", "methods", "baselines", "seeds", "output_dir"}, "config");
  ExperimentConfig cfg;

  // dataset
  const Json& ds = root.contains("dataset") ? root.at("dataset") : Json::object();
  check_keys(ds, {"csv", "synthetic"}, "dataset");
  if (ds.contains("csv") && ds.contains("synthetic")) throw ConfigError("dataset: give csv or synthetic, not both");
  if (ds.contains("csv")) {
    const Json& c = ds.at("csv");
    check_keys(c, {"path", "targets", "standardize"}, "dataset.csv");
    CsvSource src;
    src.path = get<std::string>(c, "path", "dataset.csv");
    src.targets = get<std::vector<std::string>>(c, "targets", "dataset.csv");
    src.standardize = get_or<bool>(c, "standardize", true, "dataset.csv");
    cfg.dataset = src;
  } else {
    const Json s = ds.contains("synthetic") ? ds.at("synthetic") : Json::object();
    const std::string w = "dataset.synthetic";
    check_keys(s, {"n", "seed", "teacher_dims", "teacher_activation", "teacher_scale", "noise"}, w);
    SyntheticSource src;
    src.n = get_or<std::size_t>(s, "n", 252, w);
    src.seed = get_or<std::uint64_t>(s, "seed", 0, w);
    const auto dims = get_or<std::vector<std::size_t>>(s, "teacher_dims", {13, 10, 10, 10, 1}, w);
    const Activation act =
        s.contains("teacher_activation") ? parse_activation(s.at("teacher_activation"), w + ".teacher_activation")
                                         : Activation::logistic();
    src.teacher.network = NetworkSpec::uniform(dims, act);
    src.teacher.init = InitScheme::gaussian(get_or<double>(s, "teacher_scale", 0.0, w));
    src.teacher.noise = get_or<double>(s, "noise", 0.05, w);
    if (src.n < 1) throw ConfigError(w + ": n must be positive");
    if (!(src.teacher.noise >= 0.0)) throw ConfigError(w + ": noise must be nonnegative");
    cfg.dataset = src;
  }

  // network
  const Json& net = root.contains("network") ? root.at("network") : Json::object();
  check_keys(net,
             {"dims", "activation", "activations", "feasible_set", "feasible_sets", "regularizer", "regularizers",
              "init"},
             "network");
  cfg.network.dims = get<std::vector<std::size_t>>(net, "dims", "network");
  if (cfg.network.dims.size() < 2) throw ConfigError("network.dims needs at least two entries");
  const std::size_t depth = cfg.network.dims.size() - 1;
  cfg.network.activations =
      per_layer<Activation>(net, "activation", "activations", depth, Activation::logistic(), parse_activation, "network");
  cfg.network.feasible_sets = per_layer<FeasibleSet>(net, "feasible_set", "feasible_sets", depth,
                                                     FeasibleSet::unconstrained(), parse_feasible_set, "network");
  cfg.network.regularizers = per_layer<Regularizer>(net, "regularizer", "regularizers", depth, Regularizer::none(),
                                                    parse_regularizer, "network");
  if (net.contains("init")) cfg.init = parse_init(net.at("init"), "network.init");

  if (root.contains("loss")) cfg.loss = parse_loss(root.at("loss"), "loss");

  // shared training settings
  const Json& tr = root.contains("train") ? root.at("train") : Json::object();
  check_keys(tr, {"max_iterations", "grad_norm_tol", "record_every", "gamma_mode", "record_wall_time"}, "train");
  TrainConfig base;
  base.max_iterations = get_or<std::uint64_t>(tr, "max_iterations", 1000, "train");
  base.grad_norm_tol = get_or<double>(tr, "grad_norm_tol", 1e-8, "train");
  base.record_every = get_or<std::size_t>(tr, "record_every", 0, "train");
  const std::string gamma_mode = get_or<std::string>(tr, "gamma_mode", "backtracking", "train");
  if (gamma_mode == "backtracking") {
    base.gamma_mode = GammaMode::Backtracking;
  } else if (gamma_mode == "fixed") {
    base.gamma_mode = GammaMode::Fixed;
  } else {
    throw ConfigError("train.gamma_mode: expected 'backtracking' or 'fixed'");
  }
  cfg.record_wall_time = get_or<bool>(tr, "record_wall_time", false, "train");
  base.record_wall_time = cfg.record_wall_time;

  if (root.contains("methods")) {
    const Json& list = root.at("methods");
    if (!list.is_array()) throw ConfigError("methods: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string w = "methods[" + std::to_string(i) + "]";
      const Json& m = list[i];
      check_keys(m,
                 {"name", "upperbound", "upperbounds", "schedule", "schedules", "unit_stepsize", "exact_bcd",
                  "sampler", "allow_heuristic"},
                 w);
      MethodConfig mc{get<std::string>(m, "name", w), base};
      mc.train.upperbounds = per_layer<UpperboundKind>(m, "upperbound", "upperbounds", depth,
                                                       UpperboundKind::first_order(1.0), parse_upperbound, w);
      if (!m.contains("upperbounds")) mc.train.upperbounds.resize(1);
      mc.train.unit_stepsize = get_or<bool>(m, "unit_stepsize", false, w);
      mc.train.exact_bcd = get_or<bool>(m, "exact_bcd", false, w);
      mc.train.allow_heuristic = get_or<bool>(m, "allow_heuristic", false, w);
      mc.train.schedules.clear();
      if (m.contains("schedule") || m.contains("schedules")) {
        mc.train.schedules =
            per_layer<StepsizeSchedule>(m, "schedule", "schedules", depth, {}, parse_schedule, w);
        if (!m.contains("schedules")) mc.train.schedules.resize(1);
      } else if (!mc.train.unit_stepsize && !mc.train.exact_bcd) {
        throw ConfigError(w + ": needs a schedule, unit_stepsize or exact_bcd");
      }
      if (m.contains("sampler")) mc.train.sampler = parse_sampler(m.at("sampler"), w + ".sampler");
      cfg.methods.push_back(std::move(mc));
    }
  }

  if (root.contains("baselines")) {
    const Json& list = root.at("baselines");
    if (!list.is_array()) throw ConfigError("baselines: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string w = "baselines[" + std::to_string(i) + "]";
      const Json& b = list[i];
      check_keys(b, {"kind", "name", "rate", "epsilon"}, w);
      BaselineSpec spec;
      const std::string kind = get<std::string>(b, "kind", w);
      if (kind == "bp_clr") {
        spec.type = BaselineType::BpClr;
        spec.rate = get_or<double>(b, "rate", 0.1, w);
        spec.name = get_or<std::string>(b, "name", "bp-clr", w);
        if (!(spec.rate >= 0.0)) throw ConfigError(w + ": rate must be nonnegative");
      } else if (kind == "adagrad") {
        spec.type = BaselineType::Adagrad;
        spec.rate = get_or<double>(b, "rate", 0.01, w);
        spec.eps = get_or<double>(b, "epsilon", 1e-8, w);
        spec.name = get_or<std::string>(b, "name", "adagrad", w);
        if (!(spec.rate > 0.0) || !(spec.eps > 0.0)) throw ConfigError(w + ": rate and epsilon must be positive");
      } else {
        throw ConfigError(w + ": unknown baseline '" + kind + "'");
      }
      cfg.baselines.push_back(spec);
    }
  }

  cfg.seeds = get_or<std::vector<std::uint64_t>>(root, "seeds", {0}, "config");
  cfg.output_dir = get_or<std::string>(root, "output_dir", "out", "config");
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  Json root;
  try {
    root = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment_config(root);
}

inline Dataset load_dataset(const ExperimentConfig& cfg) {
  if (const auto* csv = std::get_if<CsvSource>(&cfg.dataset)) {
    return load_csv_dataset(csv->path, csv->targets, csv->standardize);
  }
  const auto& syn = std::get<SyntheticSource>(cfg.dataset);
  return synth_regression(syn.seed, syn.n, syn.teacher.network.dims.front(), syn.teacher).data;
}

// ---------------------------------------------------------------------------
// Runner

struct RunSummary {
  std::string method;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  double final_normalized_mse = 0.0;
  std::uint64_t iterations = 0;  // native iterations of the method
  double cycles = 0.0;           // full passes over all layers
  bool converged = false;
  double wall_seconds = 0.0;
  std::string curve_path;
  std::string summary_path;
};

struct ExperimentReport {
  std::vector<RunSummary> runs;

  bool ok() const {
    for (const auto& r : runs) {
      if (!r.ok) return false;
    }
    return true;
  }
};

inline Json summary_json(const RunSummary& s) {
  Json j;
  j["method"] = s.method;
  j["seed"] = s.seed;
  j["status"] = s.ok ? "ok" : "failed";
  if (!s.ok) j["error"] = s.error;
  j["final_f"] = s.final_f;
  j["final_grad_norm"] = s.final_grad_norm;
  j["final_normalized_mse"] = s.final_normalized_mse;
  j["iterations"] = s.iterations;
  j["cycles"] = s.cycles;
  j["converged"] = s.converged;
  j["wall_seconds"] = s.wall_seconds;
  return j;
}

/// Number of concurrent runs, from BSUM_TRAIN_THREADS (default 1).
inline std::size_t threads_from_env() {
  const char* v = std::getenv("BSUM_TRAIN_THREADS");
  if (v == nullptr) return 1;
  try {
    const long n = std::stol(v);
    return n >= 1 ? static_cast<std::size_t>(n) : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

struct RunJob {
  std::string method;
  std::uint64_t seed;
  const MethodConfig* method_cfg = nullptr;
  const BaselineSpec* baseline = nullptr;
};

inline RunSummary execute_run(const ExperimentConfig& cfg, const Dataset& data, const RunJob& job) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  RunSummary s;
  s.method = job.method;
  s.seed = job.seed;
  const std::size_t depth = cfg.network.depth();
  TrainResult result;
  try {
    // every method sees the same initial network for a given seed
    const Network net = build_network(cfg.network, cfg.init, job.seed);
    if (job.method_cfg != nullptr) {
      TrainConfig tc = job.method_cfg->train;
      tc.sampler.seed = job.seed;
      result = tc.sampler.mode == SamplerMode::Full ? train(net, data, cfg.loss, tc)
                                                    : stochastic_train(net, data, cfg.loss, tc);
      s.cycles = static_cast<double>(result.iterations) / static_cast<double>(depth);
    } else {
      const std::uint64_t budget = cfg.methods.empty() ? 1000 : cfg.methods.front().train.max_iterations;
      BaselineConfig bc;
      bc.iterations = (budget + depth - 1) / depth;
      bc.grad_norm_tol = cfg.methods.empty() ? 1e-8 : cfg.methods.front().train.grad_norm_tol;
      bc.record_wall_time = cfg.record_wall_time;
      result = job.baseline->type == BaselineType::BpClr
                   ? baseline_bp_clr(net, data, cfg.loss, job.baseline->rate, bc)
                   : baseline_adagrad(net, data, cfg.loss, job.baseline->rate, job.baseline->eps, bc);
      s.cycles = static_cast<double>(result.iterations);
    }
  } catch (const Error& e) {
    result.aborted = true;
    result.error = e.what();
  }
  s.ok = !result.aborted;
  s.error = result.error;
  s.iterations = result.iterations;
  s.converged = result.converged;
  if (!result.trace.empty()) {
    s.final_f = result.trace.back().f;
    s.final_grad_norm = result.trace.back().full_grad_norm;
    s.final_normalized_mse = result.trace.back().normalized_mse;
  }
  if (cfg.record_wall_time) s.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();

  const std::filesystem::path dir(cfg.output_dir);
  const std::string stem = job.method + "_seed" + std::to_string(job.seed);
  s.curve_path = (dir / (stem + ".csv")).string();
  s.summary_path = (dir / (stem + ".json")).string();
  emit_curves(curve_rows(job.method, job.seed, result.trace), s.curve_path);
  std::ofstream out(s.summary_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(s.summary_path + ": cannot open for writing");
  out << summary_json(s).dump(2) << '\n';
  return s;
}

/// Trains every (method, seed) pair and writes its files. Runs that fail are
/// reported in the returned summaries; the other runs still complete.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t threads = threads_from_env()) {
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  if (data.x.rows() != static_cast<Eigen::Index>(cfg.network.dims.front()) ||
      data.y.rows() != static_cast<Eigen::Index>(cfg.network.dims.back())) {
    throw ConfigError("dataset shape " + shape_string(data.x) + " -> " + shape_string(data.y) +
                      " does not match network dims");
  }
  std::filesystem::create_directories(cfg.output_dir);

  std::vector<RunJob> jobs;
  for (const auto& m : cfg.methods) {
    for (auto seed : cfg.seeds) jobs.push_back({m.name, seed, &m, nullptr});
  }
  for (const auto& b : cfg.baselines) {
    for (auto seed : cfg.seeds) jobs.push_back({b.name, seed, nullptr, &b});
  }

  ExperimentReport report;
  report.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        report.runs[i] = execute_run(cfg, data, jobs[i]);
      } catch (const std::exception& e) {
        report.runs[i].method = jobs[i].method;
        report.runs[i].seed = jobs[i].seed;
        report.runs[i].ok = false;
        report.runs[i].error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

}  // namespace bsum::harness
