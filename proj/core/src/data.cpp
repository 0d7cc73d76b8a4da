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

#include "prong/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <zlib.h>

#include "prong/errors.hpp"

namespace prong {

namespace {

// Reads a whole file, inflating it if it is gzip-compressed.
std::string read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw Error("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = Z_OK;
  const char* msg = gzerror(f, &err);
  gzclose(f);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
    throw FormatError(path.string() + ": decompression failed: " + msg, out.size());
  }
  return out;
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const std::string& file) {
  if (bytes.size() < offset + 4) throw FormatError(file + ": truncated header", bytes.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

void Dataset::validate() const {
  if (inputs.rows() != targets.rows()) {
    throw ValidationError("dataset '" + name + "': " + std::to_string(inputs.rows()) +
                          " inputs but " + std::to_string(targets.rows()) + " targets");
  }
  if (!labels.empty() && labels.size() != size()) {
    throw ValidationError("dataset '" + name + "': label count does not match");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw ValidationError("dataset '" + name + "': non-finite values");
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const std::string img = read_maybe_gzip(images);
  const std::string lab = read_maybe_gzip(labels);
  const std::string img_name = images.filename().string();
  const std::string lab_name = labels.filename().string();

  const std::uint32_t img_magic = read_be32(img, 0, img_name);
  if (img_magic != kIdxImageMagic) {
    throw FormatError(img_name + ": bad magic number " + std::to_string(img_magic), 0);
  }
  const std::uint32_t count = read_be32(img, 4, img_name);
  const std::uint32_t rows = read_be32(img, 8, img_name);
  const std::uint32_t cols = read_be32(img, 12, img_name);
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  const std::size_t needed = 16 + static_cast<std::size_t>(count) * pixels;
  if (img.size() < needed) {
    throw FormatError(img_name + ": truncated pixel data (expected " + std::to_string(needed) +
                          " bytes)",
                      img.size());
  }

  const std::uint32_t lab_magic = read_be32(lab, 0, lab_name);
  if (lab_magic != kIdxLabelMagic) {
    throw FormatError(lab_name + ": bad magic number " + std::to_string(lab_magic), 0);
  }
  const std::uint32_t lab_count = read_be32(lab, 4, lab_name);
  if (lab_count != count) {
    throw FormatError(lab_name + ": " + std::to_string(lab_count) + " labels for " +
                          std::to_string(count) + " images",
                      4);
  }
  if (lab.size() < 8 + static_cast<std::size_t>(count)) {
    throw FormatError(lab_name + ": truncated label data", lab.size());
  }

  Dataset d;
  d.name = images.stem().string();
  d.inputs.resize(count, static_cast<Eigen::Index>(pixels));
  d.targets = Matrix::Zero(count, 10);
  d.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t base = 16 + static_cast<std::size_t>(i) * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      d.inputs(i, static_cast<Eigen::Index>(p)) =
          static_cast<unsigned char>(img[base + p]) / 255.0;
    }
    const int label = static_cast<unsigned char>(lab[8 + i]);
    if (label > 9) throw FormatError(lab_name + ": label out of range", 8 + i);
    d.labels[i] = label;
    d.targets(i, label) = 1.0;
  }
  return d;
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
    throw DimensionError("write_idx_images: pixel buffer size does not match the dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_be32(out, kIdxImageMagic);
  write_be32(out, count);
  write_be32(out, rows);
  write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

namespace {

Matrix downsample_rows(const Matrix& in) {
  if (in.cols() != 784) {
    throw DimensionError("downsample: expected 784-pixel (28x28) rows, got " +
                         std::to_string(in.cols()));
  }
  Matrix out(in.rows(), 100);
  for (Eigen::Index n = 0; n < in.rows(); ++n) {
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) {
        const int y = 4 + 2 * r;
        const int x = 4 + 2 * c;
        const double sum = in(n, y * 28 + x) + in(n, y * 28 + x + 1) + in(n, (y + 1) * 28 + x) +
                           in(n, (y + 1) * 28 + x + 1);
        out(n, r * 10 + c) = 0.25 * sum;
      }
    }
  }
  return out;
}

}  // namespace

Dataset downsample(const Dataset& data) {
  Dataset out;
  out.name = data.name + "-10x10";
  out.inputs = downsample_rows(data.inputs);
  out.labels = data.labels;
  if (data.targets.cols() == 784 && data.targets.rows() == data.inputs.rows() &&
      data.labels.empty()) {
    out.targets = downsample_rows(data.targets);
  } else {
    out.targets = data.targets;
  }
  return out;
}

Dataset synthetic_gaussian(std::size_t n, const Vector& mean, const Matrix& covariance,
                           std::uint64_t seed) {
  const Eigen::Index dim = mean.size();
  if (covariance.rows() != dim || covariance.cols() != dim) {
    throw DimensionError("synthetic_gaussian: covariance must be " + std::to_string(dim) + "x" +
                         std::to_string(dim));
  }
  const linalg::EigenDecomposition eig = linalg::sym_eig(covariance);
  const double top = std::max(eig.eigenvalues.maxCoeff(), 0.0);
  if (eig.eigenvalues.minCoeff() < -1e-10 * std::max(top, 1.0)) {
    throw ValidationError("synthetic_gaussian: covariance is not positive semi-definite");
  }
  const Matrix factor =
      eig.eigenvectors * eig.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  Rng rng(seed);
  Dataset d;
  d.name = "gaussian";
  d.inputs.resize(static_cast<Eigen::Index>(n), dim);
  Vector z(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) z(k) = rng.normal();
    d.inputs.row(static_cast<Eigen::Index>(i)) = (mean + factor * z).transpose();
  }
  d.targets = d.inputs;
  return d;
}

namespace {

struct Stroke {
  std::vector<std::array<double, 2>> points;
};

// Ten fixed templates, identical for every dataset seed.
const std::vector<Stroke>& digit_templates() {
  static const std::vector<Stroke> templates = [] {
    std::vector<Stroke> out;
    for (std::uint64_t k = 0; k < 10; ++k) {
      Rng rng = Rng::derive(0x6469676974ULL, k);
      Stroke s;
      const int count = 3 + static_cast<int>(rng.index(3));
      for (int p = 0; p < count; ++p) s.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
      out.push_back(std::move(s));
    }
    return out;
  }();
  return templates;
}

double segment_distance2(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = ax + t * dx - px;
  const double qy = ay + t * dy - py;
  return qx * qx + qy * qy;
}

}  // namespace

Dataset synthetic_digits(std::size_t n, std::uint64_t seed) {
  const auto& templates = digit_templates();
  Rng rng(seed);
  Dataset d;
  d.name = "synthetic-digits";
  d.inputs = Matrix::Zero(static_cast<Eigen::Index>(n), 784);
  d.targets = Matrix::Zero(static_cast<Eigen::Index>(n), 10);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.index(10));
    const double angle = rng.uniform(-0.35, 0.35);
    const double scale = rng.uniform(0.8, 1.1);
    const double sx = rng.uniform(-0.15, 0.15);
    const double sy = rng.uniform(-0.15, 0.15);
    const double pen = rng.uniform(0.9, 1.5);
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : templates[static_cast<std::size_t>(label)].points) {
      const double jx = p[0] + rng.uniform(-0.08, 0.08);
      const double jy = p[1] + rng.uniform(-0.08, 0.08);
      const double x = scale * (ca * jx - sa * jy) + sx;
      const double y = scale * (sa * jx + ca * jy) + sy;
      pts.push_back({13.5 + 7.5 * x, 13.5 + 7.5 * y});
    }
    const double inv = 1.0 / (2.0 * pen * pen);
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) {
        double best = INFINITY;
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
          best = std::min(best, segment_distance2(c, r, pts[s][0], pts[s][1], pts[s + 1][0],
                                                  pts[s + 1][1]));
        }
        const double v = std::exp(-best * inv);
        d.inputs(static_cast<Eigen::Index>(i), r * 28 + c) = v < 1e-3 ? 0.0 : v;
      }
    }
    d.labels[i] = label;
    d.targets(static_cast<Eigen::Index>(i), label) = 1.0;
  }
  return d;
}

Dataset as_autoencoder(Dataset data) {
  data.targets = data.inputs;
  data.labels.clear();
  return data;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= static_cast<std::size_t>(m.rows())) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.name = data.name;
  out.inputs = gather_rows(data.inputs, indices);
  out.targets = gather_rows(data.targets, indices);
  if (!data.labels.empty()) {
    for (std::size_t i : indices) out.labels.push_back(data.labels[i]);
  }
  return out;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw InsufficientSamplesError("cannot draw " + std::to_string(k) +
                                            " distinct rows from " + std::to_string(n));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, std::size_t validation_count,
                                             std::uint64_t seed) {
  if (validation_count >= data.size()) {
    throw ValidationError("split_validation: validation split would leave no training rows");
  }
  Rng rng(seed);
  const std::vector<std::size_t> order = sample_without_replacement(data.size(), data.size(), rng);
  const std::size_t cut = data.size() - validation_count;
  const std::span<const std::size_t> all(order);
  Dataset train = subset(data, all.subspan(0, cut));
  Dataset valid = subset(data, all.subspan(cut));
  train.name = data.name + "-train";
  valid.name = data.name + "-valid";
  return {std::move(train), std::move(valid)};
}

BatchPlan::BatchPlan(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : size_(dataset_size), batch_size_(batch_size), seed_(seed) {
  if (dataset_size == 0) throw ValidationError("BatchPlan: empty dataset");
  if (batch_size == 0) throw ValidationError("BatchPlan: batch size must be >= 1");
  reshuffle();
}

void BatchPlan::reshuffle() {
  Rng rng = Rng::derive(seed_, epoch_);
  order_ = sample_without_replacement(size_, size_, rng);
  cursor_ = 0;
}

std::vector<std::size_t> BatchPlan::next() {
  if (cursor_ >= size_) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t end = std::min(size_, cursor_ + batch_size_);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return out;
}

Batch next_batch(const Dataset& data, BatchPlan& plan) {
  Batch b;
  b.indices = plan.next();
  b.inputs = gather_rows(data.inputs, b.indices);
  b.targets = gather_rows(data.targets, b.indices);
  return b;
}

}  // namespace prong
