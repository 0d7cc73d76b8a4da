// Copyright 2026 The prong Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace prong::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_real(const std::string& text, const std::string& source, std::size_t line,
                  const char* column) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE) {
    throw ParseError(source, line, std::string("bad number '") + text + "' in column " + column);
  }
  return v;
}

std::size_t parse_count(const std::string& text, const std::string& source, std::size_t line,
                        const char* column) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(source, line, std::string("bad integer '") + text + "' in column " + column);
  }
  return static_cast<std::size_t>(std::stoull(text));
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << format_real(r.wallclock_seconds) << ',' << format_real(r.train_loss)
        << ',' << format_real(r.eval_loss) << ',' << format_real(r.learning_rate) << ','
        << (r.cond_ratio ? format_real(*r.cond_ratio) : std::string()) << ','
        << (r.reparam_event ? 1 : 0) << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty file, header row missing");
  strip_cr(line);
  if (line != kMetricsHeader) {
    throw ParseError(source, 1, "unexpected header '" + line + "'");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) {
      throw ParseError(source, line_no,
                       "expected 7 fields, found " + std::to_string(f.size()));
    }
    MetricsRow r;
    r.step = parse_count(f[0], source, line_no, "step");
    r.wallclock_seconds = parse_real(f[1], source, line_no, "wallclock_seconds");
    r.train_loss = parse_real(f[2], source, line_no, "train_loss");
    r.eval_loss = parse_real(f[3], source, line_no, "eval_loss");
    r.learning_rate = parse_real(f[4], source, line_no, "learning_rate");
    if (!f[5].empty()) r.cond_ratio = parse_real(f[5], source, line_no, "cond_ratio");
    if (f[6] != "0" && f[6] != "1") {
      throw ParseError(source, line_no, "reparam_event must be 0 or 1, found '" + f[6] + "'");
    }
    r.reparam_event = f[6] == "1";
    if (!rows.empty() && r.step <= rows.back().step) {
      throw ParseError(source, line_no, "steps must be strictly increasing");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line)) row.push_back(parse_real(f, source, line_no, "value"));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(source, line_no, "ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(source, 1, "empty matrix file");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

AlignedRuns align_runs(const std::vector<RunSeries>& runs) {
  AlignedRuns out;
  std::set<std::size_t> grid;
  for (const auto& run : runs) {
    out.names.push_back(run.name);
    for (const auto& r : run.rows) grid.insert(r.step);
  }
  out.steps.assign(grid.begin(), grid.end());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& run : runs) {
    std::vector<double> train(out.steps.size(), nan);
    std::vector<double> eval(out.steps.size(), nan);
    std::size_t next = 0;
    double last_train = nan;
    double last_eval = nan;
    for (std::size_t k = 0; k < out.steps.size(); ++k) {
      while (next < run.rows.size() && run.rows[next].step <= out.steps[k]) {
        last_train = run.rows[next].train_loss;
        last_eval = run.rows[next].eval_loss;
        ++next;
      }
      train[k] = last_train;
      eval[k] = last_eval;
    }
    out.train_loss.push_back(std::move(train));
    out.eval_loss.push_back(std::move(eval));
  }
  return out;
}

void write_loss_vs_step(std::ostream& out, const AlignedRuns& aligned) {
  out << "step";
  for (const auto& name : aligned.names) out << ',' << name << "_train_loss," << name << "_eval_loss";
  out << '\n';
  for (std::size_t k = 0; k < aligned.steps.size(); ++k) {
    out << aligned.steps[k];
    for (std::size_t r = 0; r < aligned.names.size(); ++r) {
      out << ',' << format_real(aligned.train_loss[r][k]) << ','
          << format_real(aligned.eval_loss[r][k]);
    }
    out << '\n';
  }
}

void write_loss_vs_wallclock(std::ostream& out, const std::vector<RunSeries>& runs) {
  out << "run,step,wallclock_seconds,train_loss,eval_loss\n";
  for (const auto& run : runs) {
    for (const auto& r : run.rows) {
      out << run.name << ',' << r.step << ',' << format_real(r.wallclock_seconds) << ','
          << format_real(r.train_loss) << ',' << format_real(r.eval_loss) << '\n';
    }
  }
}

}  // namespace prong::cli
