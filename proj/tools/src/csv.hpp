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

#ifndef PRONG_CLI_CSV_HPP
#define PRONG_CLI_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "prong/errors.hpp"
#include "prong/fisher.hpp"
#include "prong/linalg.hpp"
#include "prong/trainer.hpp"

namespace prong::cli {

// Malformed CSV input; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline constexpr const char* kMetricsHeader =
    "step,wallclock_seconds,train_loss,eval_loss,learning_rate,cond_ratio,reparam_event";

/// Shortest round-trippable form: 17 significant digits, "nan", "inf", "-inf".
std::string format_real(double x);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

/// Parses a metrics file written by write_metrics_csv. The header is
/// mandatory and steps must be strictly increasing. `source` names the input
/// in error messages.
std::vector<MetricsRow> read_metrics_csv(std::istream& in, const std::string& source);

/// Dense matrix as CSV, one row per line, 17 significant digits.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in, const std::string& source);

struct RunSeries {
  std::string name;
  std::vector<MetricsRow> rows;
};

// Several runs on the union of their step grids. Missing values are carried
// forward from the last observation of the same run (NaN before the first).
struct AlignedRuns {
  std::vector<std::string> names;
  std::vector<std::size_t> steps;
  std::vector<std::vector<double>> train_loss;  // [run][step index]
  std::vector<std::vector<double>> eval_loss;
};

AlignedRuns align_runs(const std::vector<RunSeries>& runs);

/// step,<name>_train_loss,<name>_eval_loss,... over the aligned grid.
void write_loss_vs_step(std::ostream& out, const AlignedRuns& aligned);

/// Long format: run,step,wallclock_seconds,train_loss,eval_loss.
void write_loss_vs_wallclock(std::ostream& out, const std::vector<RunSeries>& runs);

}  // namespace prong::cli

#endif  // PRONG_CLI_CSV_HPP
