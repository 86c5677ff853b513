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

// Dataset ingestion (CSV with header row) and the synthetic teacher-network
// regression generator.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/matrix.hpp"
#include "bsum/network.hpp"

namespace bsum::harness {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Z-scores every row of m in place (population standard deviation).
/// Constant rows become all zeros.
inline void standardize_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mean = m.row(r).mean();
    m.row(r).array() -= mean;
    const double sd = std::sqrt(m.row(r).squaredNorm() / static_cast<double>(m.cols()));
    if (sd > 0.0) {
      m.row(r) /= sd;
    } else {
      m.row(r).setZero();
    }
  }
}

/// Reads a numeric CSV whose first line is a header. Each entry of
/// `target_cols` names a header column, or failing that a 0-based column
/// index. Remaining columns become the features; samples are columns of X/Y
/// in file order. With `standardize` every feature row is z-scored.
inline Dataset load_csv_dataset(const std::string& path, const std::vector<std::string>& target_cols,
                                bool standardize) {
  std::ifstream in(path);
  if (!in) throw IngestError(path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw IngestError(path + ": empty file, header row required");
  std::vector<std::string> header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  const std::size_t width = header.size();
  if (target_cols.empty()) throw IngestError(path + ": no target columns given");

  std::vector<bool> is_target(width, false);
  std::vector<std::size_t> target_index;
  for (const auto& spec : target_cols) {
    std::size_t idx = width;
    for (std::size_t c = 0; c < width; ++c) {
      if (header[c] == spec) idx = c;
    }
    if (idx == width) {
      try {
        std::size_t used = 0;
        const long v = std::stol(spec, &used);
        if (used == spec.size() && v >= 0 && static_cast<std::size_t>(v) < width) idx = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
      }
    }
    if (idx == width) throw IngestError(path + ": target column '" + spec + "' not found in header");
    if (is_target[idx]) throw IngestError(path + ": target column '" + spec + "' given twice");
    is_target[idx] = true;
    target_index.push_back(idx);
  }
  if (target_index.size() == width) throw IngestError(path + ": no feature columns left");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != width) {
      throw IngestError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(width));
    }
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string cell = detail::trim(cells[c]);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (cell.empty() || used != cell.size() || !std::isfinite(v)) {
        throw IngestError(path + ": row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " ('" +
                          header[c] + "'): non-numeric cell '" + cell + "'");
      }
      values[c] = v;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw IngestError(path + ": no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d_in = static_cast<Eigen::Index>(width - target_index.size());
  const auto d_out = static_cast<Eigen::Index>(target_index.size());
  Dataset data{Matrix(d_in, n), Matrix(d_out, n)};
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& r = rows[static_cast<std::size_t>(s)];
    Eigen::Index f = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (!is_target[c]) data.x(f++, s) = r[c];
    }
    for (Eigen::Index t = 0; t < d_out; ++t) data.y(t, s) = r[target_index[static_cast<std::size_t>(t)]];
  }
  if (standardize) standardize_rows(data.x);
  return data;
}

struct TeacherSpec {
  NetworkSpec network;
  InitScheme init = InitScheme::gaussian(0.0);
  double noise = 0.0;  // std of additive gaussian noise on Y
};

struct SyntheticData {
  Dataset data;
  Network teacher;
};

/// X ~ N(0, 1) entrywise (d_0 x N); Y = teacher(X) + noise. The teacher's
/// weights are drawn from `seed` as well, so one seed fixes everything.
inline SyntheticData synth_regression(std::uint64_t seed, std::size_t n, std::size_t d0, const TeacherSpec& teacher) {
  if (n < 1) throw SpecError("synthetic dataset needs N >= 1");
  if (teacher.network.dims.empty() || teacher.network.dims.front() != d0) {
    throw SpecError("teacher input dimension must equal d_0 = " + std::to_string(d0));
  }
  if (!(teacher.noise >= 0.0)) throw SpecError("noise level must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SyntheticData out;
  out.data.x = Matrix(static_cast<Eigen::Index>(d0), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < out.data.x.size(); ++i) out.data.x.data()[i] = gauss(rng);
  out.teacher = build_network(teacher.network, teacher.init, rng());
  out.data.y = network_output(out.teacher, out.data.x);
  if (teacher.noise > 0.0) {
    for (Eigen::Index i = 0; i < out.data.y.size(); ++i) out.data.y.data()[i] += teacher.noise * gauss(rng);
  }
  return out;
}

/// Teacher with the reference architecture [13, 10, 10, 10, 1].
inline TeacherSpec default_teacher(Activation act = Activation::logistic(), double noise = 0.05) {
  TeacherSpec t;
  t.network = NetworkSpec::uniform({13, 10, 10, 10, 1}, act);
  t.init = InitScheme::gaussian(0.0);
  t.noise = noise;
  return t;
}

}  // namespace bsum::harness
