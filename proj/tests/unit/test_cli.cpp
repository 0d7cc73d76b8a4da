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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "experiment.hpp"
#include "prong/errors.hpp"

namespace prong::cli {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            (std::string("prong_cli_") +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Json small_doc(const fs::path& out) {
  Json doc = Json::parse(R"({
    "experiment": "small",
    "seed": 3,
    "optimizer": "prong",
    "data": {"source": "synthetic_gaussian", "count": 700, "validation": 100, "task": "binary",
             "gaussian_dim": 10, "gaussian_decay": 0.5, "seed": 2},
    "model": {"widths": [10, 8, 6, 1], "activation": "tanh", "head": "sigmoid",
              "loss": "binary_cross_entropy", "init_seed": 4},
    "train": {"learning_rate": 0.05, "momentum": 0.9, "batch_size": 32, "reparam_period": 20,
              "stat_samples": 200, "eigen_epsilon": 0.01, "max_updates": 100},
    "eval": {"interval": 10, "train_rows": 200, "record_wallclock": false},
    "fisher": {"layers": [1], "kinds": ["factorized"], "samples": 200,
               "optimizers": ["sgd", "prong"], "heatmap_layer": 1}
  })");
  doc["output_dir"] = out.string();
  return doc;
}

ExperimentConfig small_config(const fs::path& out) { return parse_config(small_doc(out)); }

std::vector<std::string> problems_of(const Json& doc) {
  try {
    parse_config(doc);
  } catch (const SchemaError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
  return std::any_of(problems.begin(), problems.end(),
                     [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

TEST(Config, SchemaErrorsListEveryOffendingKey) {
  Json doc = small_doc("x");
  doc["train"]["momentm"] = 0.5;
  doc["train"]["learning_rate"] = -1.0;
  doc["model"]["activation"] = "swish";
  doc["colour"] = "blue";
  doc["data"]["count"] = "many";
  const auto problems = problems_of(doc);
  EXPECT_EQ(problems.size(), 5u);
  EXPECT_TRUE(mentions(problems, "/train/momentm: unknown key"));
  EXPECT_TRUE(mentions(problems, "/train/learning_rate: must be > 0"));
  EXPECT_TRUE(mentions(problems, "/model/activation"));
  EXPECT_TRUE(mentions(problems, "/colour: unknown key"));
  EXPECT_TRUE(mentions(problems, "/data/count: expected integer"));
  EXPECT_EQ(schema_problems(doc), problems);
}

TEST(Config, MissingWidthsAndSemanticErrors) {
  Json doc = small_doc("x");
  doc["model"].erase("widths");
  EXPECT_TRUE(mentions(problems_of(doc), "/model/widths: required key missing"));
  Json mnist = small_doc("x");
  mnist["data"]["source"] = "mnist";
  EXPECT_THROW(parse_config(mnist), ValidationError);
  Json softmax_hidden = small_doc("x");
  softmax_hidden["model"]["widths"] = Json::array({10, 1});
  softmax_hidden["model"]["head"] = "softmax";
  softmax_hidden["model"]["loss"] = "categorical_cross_entropy";
  EXPECT_NO_THROW(parse_config(softmax_hidden));
}

TEST(Config, ToJsonRoundTrips) {
  const ExperimentConfig c = small_config("runs/x");
  const Json j = to_json(c);
  EXPECT_TRUE(schema_problems(j).empty());
  EXPECT_EQ(to_json(parse_config(j)), j);
  EXPECT_EQ(c.train.seed, 3u);
  EXPECT_EQ(c.model.spec().head(), Activation::sigmoid);
  EXPECT_EQ(c.model.spec().layers[0].activation, Activation::tanh);
}

TEST(Config, PresetsAreValid) {
  const auto names = preset_names();
  for (const char* expected : {"ae-mnist-desk", "ae-mnist-paper", "mlp-fisher-desk"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), expected), names.end()) << expected;
  }
  for (const auto& name : names) {
    const Json doc = preset(name);
    EXPECT_TRUE(schema_problems(doc).empty()) << name;
    EXPECT_NO_THROW(parse_config(doc)) << name;
  }
  const ExperimentConfig desk = parse_config(preset("ae-mnist-desk"));
  EXPECT_EQ(desk.model.widths,
            (std::vector<std::size_t>{100, 200, 100, 50, 16, 50, 100, 200, 100}));
  EXPECT_EQ(desk.train.reparam_period, 200u);
  EXPECT_EQ(desk.train.stat_samples, 100u);
  const ExperimentConfig full = parse_config(preset("ae-mnist-paper"));
  EXPECT_EQ(full.model.widths,
            (std::vector<std::size_t>{784, 1000, 500, 250, 30, 250, 500, 1000, 784}));
  EXPECT_EQ(full.train.reparam_period, 1000u);
  EXPECT_EQ(full.grid.eigen_epsilon, (std::vector<double>{1.0, 0.1, 0.01, 0.001}));
  EXPECT_EQ(full.grid.batch_size, (std::vector<std::size_t>{32, 64, 128, 256}));
  EXPECT_THROW(preset("nope"), ValidationError);
}

TEST(Config, ResolveMergesFileOverPresetAndFlags) {
  TempDir dir;
  spit(dir / "c.json", R"({"train": {"learning_rate": 0.5}, "eval": {"interval": 7}})");
  const ExperimentConfig c =
      resolve_config("ae-mnist-desk", dir / "c.json", 99, (dir / "out").string());
  EXPECT_EQ(c.train.learning_rate, 0.5);
  EXPECT_EQ(c.eval.interval, 7u);
  EXPECT_EQ(c.train.reparam_period, 200u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.output_dir, (dir / "out").string());
  spit(dir / "broken.json", "{\"train\": ");
  try {
    read_json_file(dir / "broken.json");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
}

TEST(Csv, FormatRealRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 5e-324}) {
    EXPECT_EQ(std::strtod(format_real(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_real(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_real(-std::numeric_limits<double>::infinity()), "-inf");
}

std::vector<MetricsRow> sample_rows() {
  std::vector<MetricsRow> rows(3);
  rows[0] = {0, 0.0, 0.1 + 0.2, std::numeric_limits<double>::quiet_NaN(), 0.01, std::nullopt, true};
  rows[1] = {10, 1.25, 1.0 / 3.0, 2.0 / 3.0, 0.01, 0.0123456789012345678, false};
  rows[2] = {25, 3.5, 1e-17, std::numeric_limits<double>::infinity(), 0.001, 7.0, true};
  return rows;
}

TEST(Csv, MetricsRoundTripBitExact) {
  std::ostringstream out;
  write_metrics_csv(out, sample_rows());
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), kMetricsHeader);
  std::istringstream in(out.str());
  const auto back = read_metrics_csv(in, "m.csv");
  const auto rows = sample_rows();
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(back[k].step, rows[k].step);
    EXPECT_EQ(back[k].wallclock_seconds, rows[k].wallclock_seconds);
    EXPECT_EQ(back[k].train_loss, rows[k].train_loss);
    EXPECT_EQ(std::isnan(back[k].eval_loss), std::isnan(rows[k].eval_loss));
    if (!std::isnan(rows[k].eval_loss)) {
      EXPECT_EQ(back[k].eval_loss, rows[k].eval_loss);
    }
    EXPECT_EQ(back[k].learning_rate, rows[k].learning_rate);
    EXPECT_EQ(back[k].cond_ratio, rows[k].cond_ratio);
    EXPECT_EQ(back[k].reparam_event, rows[k].reparam_event);
  }
  std::ostringstream again;
  write_metrics_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
}

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_metrics_csv(in, "bad.csv");
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:" + std::to_string(e.line())), std::string::npos)
        << e.what();
    return e.line();
  }
  return 0;
}

TEST(Csv, ParseErrorsCarryLineNumbers) {
  const std::string header = std::string(kMetricsHeader) + "\n";
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_EQ(parse_error_line("step,foo\n0,1\n"), 1u);
  EXPECT_EQ(parse_error_line(header + "0,0,1,1,0.1,,0\n10,0,abc,1,0.1,,0\n"), 3u);
  EXPECT_EQ(parse_error_line(header + "0,0,1,1,0.1,,0\n0,0,1,1,0.1,,0\n"), 3u);
  EXPECT_EQ(parse_error_line(header + "0,0,1,1,0.1,,0\n5,0,1,1,0.1\n"), 3u);
  EXPECT_EQ(parse_error_line(header + "0,0,1,1,0.1,,2\n"), 2u);
  std::istringstream ok(header);
  EXPECT_TRUE(read_metrics_csv(ok, "ok.csv").empty());
}

TEST(Csv, MatrixRoundTrip) {
  Matrix m(2, 3);
  m << 0.1, -1e-300, 3.0, 1.0 / 7.0, 0.0, -2.5;
  std::ostringstream out;
  write_matrix_csv(out, m);
  std::istringstream in(out.str());
  EXPECT_EQ(read_matrix_csv(in, "m.csv"), m);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_matrix_csv(ragged, "r.csv"), ParseError);
}

MetricsRow row(std::size_t step, double train, double eval) {
  MetricsRow r;
  r.step = step;
  r.train_loss = train;
  r.eval_loss = eval;
  return r;
}

TEST(Replay, AlignsTwoRunsByCarryingLastObservationForward) {
  const std::vector<RunSeries> runs{
      {"a", {row(0, 3.0, 30.0), row(10, 2.0, 20.0), row(20, 1.0, 10.0)}},
      {"b", {row(5, 9.0, 90.0), row(15, 8.0, 80.0)}}};
  const AlignedRuns al = align_runs(runs);
  EXPECT_EQ(al.steps, (std::vector<std::size_t>{0, 5, 10, 15, 20}));
  EXPECT_EQ(al.train_loss[0], (std::vector<double>{3.0, 3.0, 2.0, 2.0, 1.0}));
  EXPECT_TRUE(std::isnan(al.train_loss[1][0]));
  EXPECT_EQ(std::vector<double>(al.train_loss[1].begin() + 1, al.train_loss[1].end()),
            (std::vector<double>{9.0, 9.0, 8.0, 8.0}));
  EXPECT_EQ(al.eval_loss[1][4], 80.0);
  std::ostringstream out;
  write_loss_vs_step(out, al);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "step,a_train_loss,a_eval_loss,b_train_loss,b_eval_loss");
}

TEST(Replay, SingleRunPassesThroughUnchanged) {
  TempDir dir;
  fs::create_directories(dir / "run1");
  {
    std::ofstream out(dir / "run1" / "metrics.csv");
    write_metrics_csv(out, sample_rows());
  }
  std::ostringstream log;
  ASSERT_EQ(cmd_replay({dir / "run1" / "metrics.csv"}, dir / "out", log), kExitOk);
  std::istringstream in(slurp(dir / "out" / "loss_vs_step.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,run1_train_loss,run1_eval_loss");
  const auto rows = sample_rows();
  for (const auto& r : rows) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, std::to_string(r.step) + "," + format_real(r.train_loss) + "," +
                        format_real(r.eval_loss));
  }
  EXPECT_FALSE(std::getline(in, line));
  EXPECT_TRUE(fs::exists(dir / "out" / "loss_vs_wallclock.csv"));
}

TEST(Replay, EmptyFileIsParseError) {
  TempDir dir;
  spit(dir / "empty.csv", "");
  std::ostringstream log;
  try {
    cmd_replay({dir / "empty.csv"}, std::nullopt, log);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Experiment, ContentHashMatchesGitBlob) {
  EXPECT_EQ(content_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(content_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Experiment, TrainWritesSelfDescribingRunDirectory) {
  TempDir dir;
  const ExperimentConfig c = small_config(dir / "run");
  std::ostringstream log;
  ASSERT_EQ(cmd_train(c, log), kExitOk) << log.str();
  for (const char* f : {"metrics.csv", "config.json", "checkpoint.bin", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }
  const Json manifest = Json::parse(slurp(dir / "run" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["config_hash"], content_hash(slurp(dir / "run" / "config.json")));
  // The snapshot alone reproduces the run.
  const ExperimentConfig again = parse_config(read_json_file(dir / "run" / "config.json"));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Experiment, SameSeedSameMetrics) {
  TempDir dir;
  for (const char* opt : {"sgd", "prong"}) {
    Json doc = small_doc(dir / "a");
    doc["optimizer"] = opt;
    doc["train"]["momentum"] = 0.0;
    std::ostringstream log;
    ASSERT_EQ(cmd_train(parse_config(doc), log), kExitOk);
    doc["output_dir"] = (dir / "b").string();
    ASSERT_EQ(cmd_train(parse_config(doc), log), kExitOk);
    EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv")) << opt;
    EXPECT_EQ(slurp(dir / "a" / "checkpoint.bin"), slurp(dir / "b" / "checkpoint.bin")) << opt;
  }
}

TEST(Experiment, ReparamRowsAtMultiplesOfPeriod) {
  TempDir dir;
  const ExperimentConfig c = small_config(dir / "run");
  const PreparedData data = prepare_data(c.data);
  const TrainResult r = run_experiment(c, data);
  std::size_t events = 0;
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.reparam_event, row.step % 20 == 0 && row.step < 100) << row.step;
    events += row.reparam_event;
  }
  EXPECT_EQ(events, 5u);
  ExperimentConfig sgd = c;
  sgd.optimizer = OptimizerKind::sgd;
  for (const auto& row : run_experiment(sgd, data).rows) EXPECT_FALSE(row.reparam_event);
}

TEST(Experiment, ModelMustFitData) {
  Json doc = small_doc("x");
  doc["model"]["widths"] = Json::array({12, 4, 1});
  const ExperimentConfig c = parse_config(doc);
  EXPECT_THROW(make_task(c, prepare_data(c.data)), ValidationError);
}

TEST(Grid, ExpandsRowMajor) {
  Json doc = small_doc("g");
  doc["grid"] = Json::parse(R"({"learning_rate": [0.1, 0.01], "momentum": [0, 0.5, 0.9]})");
  const auto cells = expand_grid(parse_config(doc));
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[1].train.learning_rate, 0.1);
  EXPECT_EQ(cells[1].train.momentum, 0.5);
  EXPECT_EQ(cells[3].train.learning_rate, 0.01);
  EXPECT_EQ(cells[3].train.momentum, 0.0);
  EXPECT_EQ(cells[5].output_dir, (fs::path("g") / "cell_005").string());
  for (const auto& c : cells) EXPECT_EQ(c.grid.cell_count(), 1u);
}

TEST(Grid, SingleCellGridEqualsTrain) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cmd_train(small_config(dir / "train"), log), kExitOk);
  ASSERT_EQ(cmd_grid(small_config(dir / "grid"), log), kExitOk);
  EXPECT_EQ(slurp(dir / "train" / "metrics.csv"), slurp(dir / "grid" / "cell_000" / "metrics.csv"));
  const Json best = Json::parse(slurp(dir / "grid" / "best.json"));
  EXPECT_EQ(best["cell"], 0);
}

TEST(Grid, DivergedCellsAreRecordedNotFatal) {
  TempDir dir;
  Json doc = small_doc(dir / "grid");
  doc["optimizer"] = "sgd";
  doc["model"]["head"] = "identity";
  doc["model"]["loss"] = "squared_error";
  doc["grid"] = Json::parse(R"({"learning_rate": [0.01, 1000000]})");
  std::ostringstream log;
  ASSERT_EQ(cmd_grid(parse_config(doc), log), kExitOk);
  std::istringstream summary(slurp(dir / "grid" / "summary.csv"));
  std::string header, first, second;
  std::getline(summary, header);
  std::getline(summary, first);
  std::getline(summary, second);
  EXPECT_EQ(first.substr(first.rfind(',') - 2, 2), ",0");
  EXPECT_NE(second.find(",1,"), std::string::npos) << second;
  EXPECT_EQ(Json::parse(slurp(dir / "grid" / "best.json"))["cell"], 0);
}

TEST(DiagnoseFisher, WritesConditioningSeriesAndHeatmaps) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(cmd_diagnose_fisher(small_config(dir / "diag"), log), kExitOk) << log.str();
  const Json summary = Json::parse(slurp(dir / "diag" / "summary.json"));
  EXPECT_LT(std::stod(summary["runs"]["prong"]["first_cond_ratio"].get<std::string>()), 0.1);
  EXPECT_EQ(summary["runs"]["sgd"]["reparam_events"], 0);
  EXPECT_EQ(summary["runs"]["prong"]["reparam_events"], 5);
  for (const char* name : {"heatmap_before.csv", "heatmap_after.csv"}) {
    std::istringstream in(slurp(dir / "diag" / name));
    const Matrix m = read_matrix_csv(in, name);
    EXPECT_EQ(m.rows(), 48);
    EXPECT_EQ(m, m.transpose()) << name;
  }
  std::istringstream fisher_csv(slurp(dir / "diag" / "fisher_sgd.csv"));
  std::string header;
  std::getline(fisher_csv, header);
  EXPECT_EQ(header, "step,layer,kind,lambda_max,lambda_min,cond,cond_ratio_to_initial");
  EXPECT_TRUE(fs::exists(dir / "diag" / "metrics_prong.csv"));
}

TEST(DiagnoseFisher, BlockSizeGuard) {
  TempDir dir;
  Json doc = small_doc(dir / "diag");
  doc["data"]["gaussian_dim"] = 60;
  doc["model"]["widths"] = Json::array({60, 50, 1});
  doc["fisher"]["layers"] = Json::array({0});
  doc["fisher"]["heatmap_layer"] = 0;
  std::ostringstream log;
  EXPECT_THROW(cmd_diagnose_fisher(parse_config(doc), log), TooLargeError);
}

int run_driver(const std::string& args) {
  const std::string cmd = std::string(PRONG_DRIVER) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Driver, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_driver("presets"), kExitOk);
  EXPECT_EQ(run_driver("schema"), kExitOk);
  EXPECT_EQ(run_driver("train --bogus-flag"), kExitUsage);
  Json bad = small_doc(dir / "bad");
  bad["train"]["momentm"] = 0.5;
  spit(dir / "bad.json", bad.dump());
  EXPECT_EQ(run_driver("train --config " + (dir / "bad.json").string()), kExitUsage);
  Json diverge = small_doc(dir / "div");
  diverge["optimizer"] = "sgd";
  diverge["model"]["head"] = "identity";
  diverge["model"]["loss"] = "squared_error";
  diverge["train"]["learning_rate"] = 1e6;
  spit(dir / "div.json", diverge.dump());
  EXPECT_EQ(run_driver("train --config " + (dir / "div.json").string()), kExitDiverged);
  spit(dir / "empty.csv", "");
  EXPECT_EQ(run_driver("replay " + (dir / "empty.csv").string()), kExitFailure);
  spit(dir / "ok.json", small_doc(dir / "ok").dump());
  EXPECT_EQ(run_driver("train --config " + (dir / "ok.json").string() + " --seed 5 --out " +
                       (dir / "ok2").string()),
            kExitOk);
  EXPECT_EQ(Json::parse(slurp(dir / "ok2" / "manifest.json"))["seed"], 5);
}

}  // namespace
}  // namespace prong::cli
