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

// bsum command-line tool.
//
//   bsum train --config cfg.json [--out dir] [--seed n ...]
//   bsum validate-schedule --kind inverse_root --params c=0.5
//   bsum gradcheck --config cfg.json
//
// Exit codes: 0 success, 1 run failure, 2 config error.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsum/bsum.hpp"
#include "bsum/harness/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfig = 2;

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::vector<std::uint64_t>& seeds) {
  bsum::harness::ExperimentConfig cfg = bsum::harness::load_experiment_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (!seeds.empty()) cfg.seeds = seeds;
  const auto report = bsum::harness::run_experiment(cfg);
  for (const auto& r : report.runs) {
    std::cout << r.method << " seed=" << r.seed << " status=" << (r.ok ? "ok" : "failed")
              << " f=" << bsum::harness::format_double(r.final_f)
              << " grad_norm=" << bsum::harness::format_double(r.final_grad_norm) << " iterations=" << r.iterations
              << " cycles=" << r.cycles << " converged=" << (r.converged ? "yes" : "no");
    if (!r.ok) std::cout << " error=\"" << r.error << '"';
    std::cout << '\n';
  }
  return report.ok() ? kExitOk : kExitRunFailure;
}

int cmd_validate_schedule(const std::string& kind, const std::vector<std::string>& params) {
  nlohmann::json j = nlohmann::json::object();
  j["kind"] = kind;
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw bsum::ConfigError("--params expects key=value, got '" + p + "'");
    const std::string value = p.substr(eq + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw bsum::ConfigError("--params value for '" + p.substr(0, eq) + "' is not a number");
    }
    j[p.substr(0, eq)] = v;
  }
  const auto schedule = bsum::harness::config::parse_schedule(j, "schedule");
  const auto check = bsum::validate_schedule(schedule);
  nlohmann::json out;
  out["schedule"] = schedule.name();
  out["satisfies_conditions"] = check.satisfies_conditions;
  out["witness"] = check.witness;
  out["partial_sum"] = check.partial_sum;
  out["partial_sum_sq"] = check.partial_sum_sq;
  out["tail_sum_sq"] = check.tail_sum_sq;
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_gradcheck(const std::string& config_path) {
  const auto cfg = bsum::harness::load_experiment_config(config_path);
  const bsum::Dataset data = bsum::harness::load_dataset(cfg);
  bool ok = true;
  for (auto seed : cfg.seeds) {
    const bsum::Network net = bsum::build_network(cfg.network, cfg.init, seed);
    for (std::size_t j = 0; j < net.depth(); ++j) {
      const bsum::BlockObjective block(net, data, cfg.loss, j);
      const bsum::Matrix analytic = block.smooth_gradient(block.anchor());
      const bsum::Matrix numeric =
          bsum::fd_gradient([&](const bsum::Matrix& w) { return block.smooth_value(w); }, block.anchor(), 1e-5);
      const double err = bsum::relative_error(analytic, numeric);
      const bool pass = err <= 1e-6;
      ok = ok && pass;
      std::printf("seed=%llu layer=%zu rel_error=%.3e %s\n", static_cast<unsigned long long>(seed), j + 1, err,
                  pass ? "PASS" : "FAIL");
    }
  }
  return ok ? kExitOk : kExitRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block upperbound training for deep networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  auto* train = app.add_subcommand("train", "Run the experiments in a JSON config");
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--out", out_dir, "Output directory (overrides the config)");
  train->add_option("--seed", seeds, "Seeds (override the config)");

  std::string kind;
  std::vector<std::string> params;
  auto* vs = app.add_subcommand("validate-schedule", "Check a stepsize schedule against the convergence conditions");
  vs->add_option("--kind", kind, "inverse_root | geometric | recursive | constant | armijo")->required();
  vs->add_option("--params", params, "key=value pairs (c, alpha0, t, shrink, slope, alpha_init)");

  std::string gc_config;
  auto* gc = app.add_subcommand("gradcheck", "Compare block gradients with central differences");
  gc->add_option("--config", gc_config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, out_dir, seeds);
    if (vs->parsed()) return cmd_validate_schedule(kind, params);
    if (gc->parsed()) return cmd_gradcheck(gc_config);
  } catch (const bsum::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bsum::IngestError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bsum::SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return kExitConfig;
}
