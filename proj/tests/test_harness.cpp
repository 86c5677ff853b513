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
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bsum/harness/experiment.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using bsum::Activation;
using bsum::Loss;
using bsum::Matrix;
using bsum::NetworkSpec;
namespace h = bsum::harness;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bsum_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Csv, ShapeContract) {
  const auto dir = scratch_dir("csv");
  const auto path = write_file(dir / "d.csv", "a,b,t\n1,4,7\n2,5,8\n3,6,9\n");
  const auto d = h::load_csv_dataset(path, {"t"}, false);
  ASSERT_EQ(d.x.rows(), 2);
  ASSERT_EQ(d.x.cols(), 3);
  ASSERT_EQ(d.y.rows(), 1);
  EXPECT_EQ(d.x(1, 2), 6.0);
  EXPECT_EQ(d.y(0, 1), 8.0);
  const auto by_index = h::load_csv_dataset(path, {"0"}, false);
  EXPECT_EQ(by_index.y(0, 2), 3.0);
}

TEST(Csv, StandardizePopulationStd) {
  const auto dir = scratch_dir("csvz");
  const auto path = write_file(dir / "d.csv", "a,c,t\n1,5,0\n2,5,0\n3,5,1\n");
  const auto d = h::load_csv_dataset(path, {"t"}, true);
  const double z = 1.0 / std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(d.x(0, 0), -z, 1e-15);
  EXPECT_NEAR(d.x(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(d.x(0, 2), z, 1e-15);
  EXPECT_NEAR(z, 1.224744871391589, 1e-15);
  EXPECT_EQ(d.x.row(1), Matrix::Zero(1, 3));
}

TEST(Csv, Errors) {
  const auto dir = scratch_dir("csverr");
  EXPECT_THROW(h::load_csv_dataset((dir / "missing.csv").string(), {"t"}, false), bsum::IngestError);
  const auto bad = write_file(dir / "bad.csv", "a,t\n1,2\n3,x\n");
  try {
    h::load_csv_dataset(bad, {"t"}, false);
    FAIL() << "expected IngestError";
  } catch (const bsum::IngestError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  }
  const auto ok = write_file(dir / "ok.csv", "a,t\n1,2\n");
  EXPECT_THROW(h::load_csv_dataset(ok, {"nope"}, false), bsum::IngestError);
  EXPECT_THROW(h::load_csv_dataset(ok, {"a", "t"}, false), bsum::IngestError);
  const auto ragged = write_file(dir / "ragged.csv", "a,t\n1,2,3\n");
  EXPECT_THROW(h::load_csv_dataset(ragged, {"t"}, false), bsum::IngestError);
}

TEST(Synthetic, RealizableNoiselessTeacherHasZeroLoss) {
  const auto teacher = h::default_teacher(Activation::logistic(), 0.0);
  const auto s = h::synth_regression(3, 252, 13, teacher);
  EXPECT_EQ(s.data.x.rows(), 13);
  EXPECT_EQ(s.data.x.cols(), 252);
  EXPECT_EQ(s.data.y.rows(), 1);
  EXPECT_EQ(bsum::objective(s.teacher, s.data, Loss::l2()), 0.0);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = h::synth_regression(5, 40, 13, h::default_teacher());
  const auto b = h::synth_regression(5, 40, 13, h::default_teacher());
  const auto c = h::synth_regression(6, 40, 13, h::default_teacher());
  EXPECT_EQ(a.data.x, b.data.x);
  EXPECT_EQ(a.data.y, b.data.y);
  EXPECT_NE(a.data.y, c.data.y);
  EXPECT_THROW(h::synth_regression(1, 0, 13, h::default_teacher()), bsum::SpecError);
}

struct Fixture {
  bsum::Network net;
  bsum::Dataset data;
};

Fixture fixture(std::uint64_t seed) {
  const auto s = h::synth_regression(seed, 60, 13, h::default_teacher());
  return {bsum::build_network(NetworkSpec::uniform({13, 10, 1}, Activation::logistic()), bsum::InitScheme::uniform(), seed),
          s.data};
}

TEST(Baselines, ZeroRateFreezesWeights) {
  const auto f = fixture(1);
  h::BaselineConfig cfg;
  cfg.iterations = 5;
  const auto r = h::baseline_bp_clr(f.net, f.data, Loss::l2(), 0.0, cfg);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(r.net.weights[j], f.net.weights[j]);
  for (const auto& rec : r.trace) EXPECT_EQ(rec.f, r.trace.front().f);
}

TEST(Baselines, BpOnQuadraticDecreasesMonotonically) {
  std::mt19937_64 rng(2);
  const double lambda = 0.1;
  const auto net = bsum::build_network(NetworkSpec::uniform({4, 2}, Activation::identity(), bsum::Regularizer::l2(lambda)),
                                       bsum::InitScheme::uniform(), 3);
  bsum::Dataset data{oracle::gaussian(4, 30, rng), oracle::gaussian(2, 30, rng)};
  // Lipschitz constant of the gradient: largest eigenvalue of (2/N) XX' + 2 lambda
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(data.x * data.x.transpose()) * (2.0 / 30.0));
  const double lip = es.eigenvalues().maxCoeff() + 2.0 * lambda;
  h::BaselineConfig cfg;
  cfg.iterations = 200;
  const auto r = h::baseline_bp_clr(net, data, Loss::l2(), 1.9 / lip, cfg);
  ASSERT_FALSE(r.aborted);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].f, r.trace[i - 1].f + 1e-14);
  EXPECT_NEAR(r.trace.back().f, bsum::objective(bsum::Network{net.spec, {oracle::ridge(data.x, data.y, lambda)}}, data, Loss::l2()), 1e-6);
}

TEST(Baselines, BpDivergenceAborts) {
  const auto f = fixture(4);
  auto net = bsum::build_network(NetworkSpec::uniform({13, 1}, Activation::identity()), bsum::InitScheme::uniform(), 1);
  h::BaselineConfig cfg;
  cfg.iterations = 500;
  const auto r = h::baseline_bp_clr(net, f.data, Loss::l2(), 50.0, cfg);
  EXPECT_TRUE(r.aborted);
  EXPECT_NE(r.error.find("diverged"), std::string::npos);
}

TEST(Baselines, AdagradFirstStep) {
  const auto f = fixture(5);
  h::BaselineConfig cfg;
  cfg.iterations = 1;
  const double rate = 0.05;
  const double eps = 1e-8;
  const auto r = h::baseline_adagrad(f.net, f.data, Loss::l2(), rate, eps, cfg);
  const auto grads = bsum::all_block_gradients(f.net, f.data, Loss::l2());
  for (std::size_t j = 0; j < 2; ++j) {
    const Matrix expected =
        (f.net.weights[j].array() - rate * grads[j].array() / (grads[j].array().square() + eps).sqrt()).matrix();
    EXPECT_LE((r.net.weights[j] - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Baselines, AdagradAccumulatorAndZeroGradient) {
  const auto f = fixture(6);
  h::AdagradState state(f.net, 0.01, 1e-8);
  bsum::Network net = f.net;
  std::vector<Matrix> prev = state.accum;
  for (int k = 0; k < 5; ++k) {
    state.apply(net, bsum::all_block_gradients(net, f.data, Loss::l2()));
    for (std::size_t j = 0; j < prev.size(); ++j) EXPECT_TRUE((state.accum[j].array() >= prev[j].array()).all());
    prev = state.accum;
  }
  bsum::Network frozen = f.net;
  std::vector<Matrix> zeros;
  for (const auto& w : frozen.weights) zeros.push_back(Matrix::Zero(w.rows(), w.cols()));
  h::AdagradState z(frozen, 0.01, 1e-8);
  for (int k = 0; k < 3; ++k) z.apply(frozen, zeros);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(frozen.weights[j], f.net.weights[j]);
  EXPECT_THROW(h::AdagradState(f.net, 0.0, 1e-8), bsum::SpecError);
  EXPECT_THROW(h::AdagradState(f.net, 0.1, 0.0), bsum::SpecError);
}

bsum::TrainTrace sample_trace() {
  bsum::TrainTrace t;
  for (std::uint64_t k = 0; k < 4; ++k) {
    bsum::TraceRecord r;
    r.k = k;
    r.f = 1.0 / 3.0 + static_cast<double>(k) * 0.1;
    r.normalized_mse = std::exp(-static_cast<double>(k)) * 0.7;
    r.full_grad_norm = std::sqrt(2.0) / (1.0 + static_cast<double>(k));
    r.alpha = 1e-300 * static_cast<double>(k);
    r.wall_seconds = 0.0;
    t.push_back(r);
  }
  return t;
}

TEST(Curves, EmptyTraceIsHeaderOnly) {
  const auto dir = scratch_dir("curves0");
  const auto path = (dir / "c.csv").string();
  h::emit_curves({}, path);
  EXPECT_EQ(slurp(path), std::string(h::kCurveHeader) + "\n");
}

TEST(Curves, RoundTripIsLossless) {
  const auto dir = scratch_dir("curves1");
  const auto path = (dir / "c.csv").string();
  const auto rows = h::curve_rows("m", 9, sample_trace());
  h::emit_curves(rows, path);
  const auto back = h::parse_curves(path);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(back[i], rows[i]);
  const std::string text = slurp(path);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,seed,k,f,normalized_mse,grad_norm,alpha,wall_seconds");
}

TEST(Curves, GroupedByMethodSeedK) {
  const auto dir = scratch_dir("curves2");
  const auto path = (dir / "c.csv").string();
  auto rows = h::curve_rows("zeta", 2, sample_trace());
  for (const auto& r : h::curve_rows("alpha", 3, sample_trace())) rows.push_back(r);
  for (const auto& r : h::curve_rows("alpha", 1, sample_trace())) rows.push_back(r);
  std::reverse(rows.begin(), rows.end());
  h::emit_curves(rows, path);
  const auto back = h::parse_curves(path);
  for (std::size_t i = 1; i < back.size(); ++i) {
    const auto& a = back[i - 1];
    const auto& b = back[i];
    EXPECT_TRUE(std::tie(a.method, a.seed, a.k) < std::tie(b.method, b.seed, b.k));
  }
  EXPECT_EQ(back.front().method, "alpha");
  EXPECT_EQ(back.front().seed, 1u);
}

TEST(Curves, RejectsBadMethodNames) {
  EXPECT_THROW(h::check_method_name("a,b"), bsum::ConfigError);
  EXPECT_THROW(h::check_method_name(""), bsum::ConfigError);
  EXPECT_NO_THROW(h::check_method_name("bsum-inverse_root"));
}

std::string base_config(const std::string& out, const std::string& extra_methods = "") {
  return R"({
  "dataset": {"synthetic": {"n": 40, "seed": 1, "noise": 0.05}},
  "network": {"dims": [13, 6, 1], "activation": "logistic", "regularizer": {"kind": "l2", "lambda": 0.001}},
  "loss": "l2",
  "train": {"max_iterations": 20, "grad_norm_tol": 1e-9},
  "methods": [{"name": "bsum-ir", "upperbound": {"kind": "first_order", "gamma": 1.0},
               "schedule": {"kind": "inverse_root", "c": 0.9}})" +
         extra_methods + R"(],
  "seeds": [3],
  "output_dir": ")" + out + R"("
})";
}

TEST(Experiment, OneMethodOneSeed) {
  const auto dir = scratch_dir("exp1");
  const auto cfg = h::parse_experiment_config(h::Json::parse(base_config((dir / "out").string())));
  const auto report = h::run_experiment(cfg, 1);
  ASSERT_TRUE(report.ok());
  ASSERT_EQ(report.runs.size(), 1u);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 2u);
  const auto summary = h::Json::parse(slurp(report.runs[0].summary_path));
  EXPECT_EQ(summary["status"], "ok");
  EXPECT_EQ(summary["iterations"], 20);
  EXPECT_DOUBLE_EQ(summary["cycles"].get<double>(), 10.0);
  EXPECT_EQ(h::parse_curves(report.runs[0].curve_path).size(), 11u);
}

TEST(Experiment, BitwiseReproducible) {
  const auto dir = scratch_dir("exp2");
  const std::string extra = R"(, {"name": "bsum-rec", "upperbound": "second_order",
      "schedule": {"kind": "recursive", "alpha0": 1.0, "t": 0.99}})";
  auto text = base_config((dir / "a").string(), extra);
  auto cfg = h::parse_experiment_config(h::Json::parse(text));
  cfg.baselines.push_back({h::BaselineType::Adagrad, "adagrad", 0.01, 1e-8});
  cfg.seeds = {1, 2};
  const auto a = h::run_experiment(cfg, 2);
  cfg.output_dir = (dir / "b").string();
  const auto b = h::run_experiment(cfg, 1);
  ASSERT_EQ(a.runs.size(), 6u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(slurp(a.runs[i].curve_path), slurp(b.runs[i].curve_path)) << a.runs[i].curve_path;
    EXPECT_EQ(slurp(a.runs[i].summary_path), slurp(b.runs[i].summary_path));
  }
}

TEST(Experiment, SharedInitialNetwork) {
  const auto dir = scratch_dir("exp3");
  auto cfg = h::parse_experiment_config(h::Json::parse(base_config((dir / "o").string())));
  cfg.baselines.push_back({h::BaselineType::BpClr, "bp-clr", 0.1, 1e-8});
  const auto report = h::run_experiment(cfg, 1);
  const auto m = h::parse_curves(report.runs[0].curve_path);
  const auto b = h::parse_curves(report.runs[1].curve_path);
  EXPECT_EQ(m.front().k, 0u);
  EXPECT_EQ(b.front().k, 0u);
  EXPECT_EQ(m.front().f, b.front().f);
  EXPECT_EQ(m.front().grad_norm, b.front().grad_norm);
}

TEST(Experiment, FailedRunIsReportedOthersStillWritten) {
  const auto dir = scratch_dir("exp4");
  const std::string extra = R"(, {"name": "prox", "upperbound": "proximal", "unit_stepsize": true})";
  const auto cfg = h::parse_experiment_config(h::Json::parse(base_config((dir / "o").string(), extra)));
  const auto report = h::run_experiment(cfg, 1);
  EXPECT_FALSE(report.ok());
  ASSERT_EQ(report.runs.size(), 2u);
  EXPECT_TRUE(report.runs[0].ok);
  EXPECT_FALSE(report.runs[1].ok);
  EXPECT_TRUE(fs::exists(report.runs[0].curve_path));
  EXPECT_TRUE(fs::exists(report.runs[1].curve_path));
  const auto summary = h::Json::parse(slurp(report.runs[1].summary_path));
  EXPECT_EQ(summary["status"], "failed");
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadValues) {
  auto parse = [](const std::string& s) { return h::parse_experiment_config(h::Json::parse(s)); };
  const std::string good = base_config("o");
  EXPECT_NO_THROW(parse(good));
  auto j = h::Json::parse(good);
  j["bogus"] = 1;
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["network"]["activaton"] = "tanh";
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["methods"][0]["schedule"]["cc"] = 1.0;
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["seeds"] = h::Json::array();
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["methods"] = h::Json::array();
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["methods"][0].erase("schedule");
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["loss"] = "hinge";
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["network"]["dims"] = "13";
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["methods"].push_back(j["methods"][0]);
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
  j = h::Json::parse(good);
  j["baselines"] = h::Json::parse(R"([{"kind": "adagrad", "rate": 0}])");
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
}

TEST(ExperimentConfig, PerLayerLists) {
  auto j = h::Json::parse(base_config("o"));
  j["network"].erase("activation");
  j["network"]["activations"] = h::Json::parse(R"(["tanh", {"kind": "leaky_relu_smooth", "alpha": 0.2}])");
  j["network"]["feasible_sets"] = h::Json::parse(R"(["toeplitz", {"kind": "frobenius_ball", "radius": 2.0}])");
  const auto cfg = h::parse_experiment_config(j);
  EXPECT_EQ(cfg.network.activations[1], Activation::leaky_relu_smooth(0.2));
  EXPECT_EQ(cfg.network.feasible_sets[0].type, bsum::FeasibleSetType::Toeplitz);
  EXPECT_EQ(cfg.network.feasible_sets[1].radius, 2.0);
  j["network"]["activation"] = "tanh";
  EXPECT_THROW(h::parse_experiment_config(j), bsum::ConfigError);
}

TEST(ExperimentConfig, CsvSourceShapeChecked) {
  const auto dir = scratch_dir("exp5");
  write_file(dir / "d.csv", "a,b,t\n1,2,3\n4,5,6\n7,8,9\n");
  auto j = h::Json::parse(base_config((dir / "o").string()));
  j["dataset"] = {{"csv", {{"path", (dir / "d.csv").string()}, {"targets", {"t"}}}}};
  const auto cfg = h::parse_experiment_config(j);
  EXPECT_THROW(h::run_experiment(cfg, 1), bsum::ConfigError);
  j["network"]["dims"] = {2, 3, 1};
  const auto ok = h::parse_experiment_config(j);
  EXPECT_TRUE(h::run_experiment(ok, 1).ok());
}

}  // namespace
