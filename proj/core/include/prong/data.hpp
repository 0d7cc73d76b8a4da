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

#ifndef PRONG_DATA_HPP
#define PRONG_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prong/linalg.hpp"
#include "prong/random.hpp"

namespace prong {

// Examples as rows. `targets` is one-hot for classification, equal to
// `inputs` for autoencoding. `labels` is empty for unlabeled data.
struct Dataset {
  std::string name;
  Matrix inputs;
  Matrix targets;
  std::vector<int> labels;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }

  // Throws ValidationError when row counts differ or values are not finite.
  void validate() const;
};

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Loads an IDX image file and its label file. Either may be gzip-compressed.
/// Pixels are scaled to [0, 1] by 1/255 and labels become one-hot rows over
/// 10 classes. Throws FormatError with the failing byte offset on a bad
/// magic number, a truncated file, or an image/label count mismatch.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes uncompressed IDX files. `pixels` holds count * rows * cols bytes.
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// 28x28 images to 10x10: crop the 4-pixel border to 20x20, then average
/// 2x2 blocks. Autoencoder targets are downsampled along with the inputs.
Dataset downsample(const Dataset& data);

/// n rows of mean + L z with L L^T = covariance and z standard normal.
/// Throws ValidationError when the covariance is not symmetric PSD.
Dataset synthetic_gaussian(std::size_t n, const Vector& mean, const Matrix& covariance,
                           std::uint64_t seed);

/// Handwriting-like 28x28 images in [0, 1]: ten fixed stroke templates drawn
/// with random rotation, scale, shift and pen width. Labeled, one-hot targets.
/// Used in place of MNIST where the real files are unavailable.
Dataset synthetic_digits(std::size_t n, std::uint64_t seed);

// Same inputs, targets = inputs.
Dataset as_autoencoder(Dataset data);

// Rows listed in `indices`, in that order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

/// Shuffles with `seed` and returns (train, validation) with the last
/// `validation_count` shuffled rows as validation.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, std::size_t validation_count,
                                             std::uint64_t seed);

/// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

// Epoch-wise shuffled minibatch schedule. The permutation of epoch e depends
// only on (seed, e); the last batch of an epoch may be short.
class BatchPlan {
 public:
  BatchPlan(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  void reshuffle();

  std::size_t size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

struct Batch {
  Matrix inputs;
  Matrix targets;
  std::vector<std::size_t> indices;
};

Batch next_batch(const Dataset& data, BatchPlan& plan);

}  // namespace prong

#endif  // PRONG_DATA_HPP
