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

#include "experiment.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "csv.hpp"
#include "prong/checkpoint.hpp"
#include "prong/random.hpp"

namespace prong::cli {

namespace {

Dataset take_rows(const Dataset& data, std::size_t count) {
  if (count == 0 || count >= data.size()) return data;
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return subset(data, idx);
}

Dataset gaussian_data(const DataConfig& config) {
  const auto dim = static_cast<Eigen::Index>(config.gaussian_dim);
  Rng rng = Rng::derive(config.seed, 11);
  Matrix sym(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) sym(i, j) = sym(j, i) = rng.normal();
  }
  const Matrix q = linalg::sym_eig(sym).eigenvectors;
  Vector spectrum(dim);
  for (Eigen::Index k = 0; k < dim; ++k) spectrum(k) = std::pow(config.gaussian_decay, static_cast<double>(k));
  Matrix cov = q * spectrum.asDiagonal() * q.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  Dataset data = synthetic_gaussian(config.count, Vector::Zero(dim), cov, config.seed);
  data.name = "synthetic_gaussian";

  // Labels from a random linear teacher.
  Vector teacher(dim);
  for (Eigen::Index k = 0; k < dim; ++k) teacher(k) = rng.normal();
  const Vector score = data.inputs * teacher;
  data.labels.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.labels[i] = score(static_cast<Eigen::Index>(i)) > 0.0 ? 1 : 0;
  }
  return data;
}

void shape_targets(Dataset& data, DataTask task) {
  switch (task) {
    case DataTask::autoencoder:
      data = as_autoencoder(std::move(data));
      return;
    case DataTask::classification:
      if (data.labels.empty() || data.targets.cols() < 2) {
        throw ValidationError("data.task classification needs labeled multi-class data");
      }
      return;
    case DataTask::binary: {
      if (data.labels.empty()) throw ValidationError("data.task binary needs labeled data");
      // Digits: 0-4 versus 5-9. Teacher labels are already 0/1.
      const int cut = data.targets.cols() > 2 ? 5 : 1;
      data.targets.resize(static_cast<Eigen::Index>(data.size()), 1);
      for (std::size_t i = 0; i < data.size(); ++i) {
        data.targets(static_cast<Eigen::Index>(i), 0) = data.labels[i] >= cut ? 1.0 : 0.0;
      }
      return;
    }
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

PreparedData prepare_data(const DataConfig& config) {
  PreparedData out;
  DataSource source = config.source;
  if (source == DataSource::automatic) {
    source = config.train_images.empty() ? DataSource::synthetic_digits : DataSource::mnist;
  }
  Dataset data;
  switch (source) {
    case DataSource::mnist:
      if (config.train_labels.empty()) throw ValidationError("data.train_labels is required for mnist");
      data = take_rows(load_idx(config.train_images, config.train_labels), config.count);
      data.name = "mnist";
      break;
    case DataSource::synthetic_gaussian:
      data = gaussian_data(config);
      break;
    default:
      data = synthetic_digits(config.count, config.seed);
      data.name = "synthetic_digits";
      break;
  }
  out.source = data.name;
  if (config.downsample && source != DataSource::synthetic_gaussian) data = downsample(data);
  shape_targets(data, config.task);

  if (config.validation > 0) {
    if (config.validation >= data.size()) {
      throw ValidationError("data.validation must be smaller than the dataset");
    }
    auto [train, eval] = split_validation(data, config.validation, config.seed);
    out.train = std::move(train);
    out.eval = std::move(eval);
  } else {
    out.train = std::move(data);
  }
  return out;
}

Task make_task(const ExperimentConfig& config, const PreparedData& data) {
  Task task;
  task.spec = config.model.spec();
  task.loss = config.model.loss;
  task.train = &data.train;
  task.eval = data.eval ? &*data.eval : nullptr;
  const auto in = static_cast<std::size_t>(data.train.inputs.cols());
  const auto out = static_cast<std::size_t>(data.train.targets.cols());
  if (task.spec.input_dim() != in || task.spec.output_dim() != out) {
    throw ValidationError("model widths " + std::to_string(task.spec.input_dim()) + "->" +
                          std::to_string(task.spec.output_dim()) + " do not fit data with " +
                          std::to_string(in) + " inputs and " + std::to_string(out) + " targets");
  }
  task.init = init_fan_in(task.spec, config.model.init_seed);
  return task;
}

TrainOptions make_options(const ExperimentConfig& config) {
  TrainOptions o;
  o.eval_interval = config.eval.interval;
  o.train_eval_rows = config.eval.train_rows;
  o.freeze_whitening = config.freeze_whitening;
  o.record_wallclock = config.eval.record_wallclock;
  return o;
}

TrainResult run_experiment(const ExperimentConfig& config, const PreparedData& data,
                           const TrainCallbacks& callbacks) {
  const Task task = make_task(config, data);
  return train(task, config.optimizer, config.train, make_options(config), callbacks);
}

std::string content_hash(std::string_view text) {
  const std::string blob = "blob " + std::to_string(text.size()) + '\0' + std::string(text);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), blob.data(), blob.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string config_snapshot(const ExperimentConfig& config) {
  return to_json(config).dump(2) + "\n";
}

void write_run_directory(const std::filesystem::path& dir, const ExperimentConfig& config,
                         const PreparedData& data, const TrainResult& result,
                         std::string_view command) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(out, result.rows);
    if (!out) throw Error("cannot write " + (dir / "metrics.csv").string());
  }
  const std::string snapshot = config_snapshot(config);
  write_text(dir / "config.json", snapshot);

  Checkpoint ckpt;
  ckpt.spec = config.model.spec();
  ckpt.seed = config.seed;
  ckpt.step = result.updates;
  if (result.whitened) {
    ckpt.kind = Parametrization::whitened;
    ckpt.layers = result.whitened->omega.layers;
    ckpt.whitening = result.whitened->phi;
  } else {
    ckpt.kind = Parametrization::canonical;
    ckpt.layers = result.canonical.layers;
  }
  save_checkpoint(dir / "checkpoint.bin", ckpt);

  Json manifest;
  manifest["command"] = std::string(command);
  manifest["experiment"] = config.experiment;
  manifest["seed"] = config.seed;
  manifest["optimizer"] = std::string(to_string(config.optimizer));
  manifest["config_file"] = "config.json";
  manifest["config_hash"] = content_hash(snapshot);
  manifest["data_source"] = data.source;
  manifest["train_rows"] = data.train.size();
  manifest["eval_rows"] = data.eval ? data.eval->size() : 0;
  manifest["updates"] = result.updates;
  manifest["diverged"] = result.diverged;
  manifest["diagnostic"] = result.diagnostic;
  manifest["reparametrizations"] = result.reparametrizations;
  manifest["clamped_outputs"] = result.clamped_outputs;
  manifest["total_seconds"] = result.total_seconds;
  manifest["whitening_seconds"] = result.whitening_seconds;
  manifest["whitening_fraction"] =
      result.total_seconds > 0.0 ? result.whitening_seconds / result.total_seconds : 0.0;
  if (!result.rows.empty()) manifest["final_train_loss"] = format_real(result.rows.back().train_loss);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace prong::cli
