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

// Curve files: one CSV row per recorded iteration,
//
//   method,seed,k,f,normalized_mse,grad_norm,alpha,wall_seconds
//
// floats written with 17 significant digits so that parsing the file gives
// back the exact doubles. LF line endings.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bsum/errors.hpp"
#include "bsum/trainer.hpp"

namespace bsum::harness {

inline constexpr const char* kCurveHeader = "method,seed,k,f,normalized_mse,grad_norm,alpha,wall_seconds";

struct CurveRow {
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t k = 0;
  double f = 0.0;
  double normalized_mse = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

inline void check_method_name(const std::string& name) {
  if (name.empty() || name.find_first_of(",\"\n\r") != std::string::npos) {
    throw ConfigError("method name '" + name + "' must be non-empty and free of commas, quotes and newlines");
  }
}

inline std::vector<CurveRow> curve_rows(const std::string& method, std::uint64_t seed, const TrainTrace& trace) {
  check_method_name(method);
  std::vector<CurveRow> rows;
  rows.reserve(trace.size());
  for (const auto& r : trace) {
    rows.push_back({method, seed, r.k, r.f, r.normalized_mse, r.full_grad_norm, r.alpha, r.wall_seconds});
  }
  return rows;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes rows grouped by method, then seed, then k.
inline void emit_curves(std::vector<CurveRow> rows, const std::string& path) {
  std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
    return std::tie(a.method, a.seed, a.k) < std::tie(b.method, b.seed, b.k);
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path + ": cannot open for writing");
  out << kCurveHeader << '\n';
  for (const auto& r : rows) {
    check_method_name(r.method);
    out << r.method << ',' << r.seed << ',' << r.k << ',' << format_double(r.f) << ','
        << format_double(r.normalized_mse) << ',' << format_double(r.grad_norm) << ',' << format_double(r.alpha)
        << ',' << format_double(r.wall_seconds) << '\n';
  }
  out.flush();
  if (!out) throw Error(path + ": write failed");
}

inline std::vector<CurveRow> parse_curves(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader) throw IngestError(path + ": missing or wrong curve header");
  std::vector<CurveRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw IngestError(path + ": row " + std::to_string(line_no) + " needs 8 cells");
    try {
      CurveRow r;
      r.method = cells[0];
      r.seed = std::stoull(cells[1]);
      r.k = std::stoull(cells[2]);
      r.f = std::stod(cells[3]);
      r.normalized_mse = std::stod(cells[4]);
      r.grad_norm = std::stod(cells[5]);
      r.alpha = std::stod(cells[6]);
      r.wall_seconds = std::stod(cells[7]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw IngestError(path + ": row " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace bsum::harness
