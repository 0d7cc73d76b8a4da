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

#ifndef PRONG_CHECKPOINT_HPP
#define PRONG_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "prong/net.hpp"

namespace prong {

// Parameters of a network plus enough metadata to resume or re-evaluate it.
//
// On disk: the 8 magic bytes "PRONGCK1", the header length as a
// little-endian uint64, a JSON header (spec, parametrization, seed, step and
// the shape of every array), then each array as raw little-endian float64
// in declaration order: weight and bias of every layer, followed by U and c
// of every whitening entry for whitened checkpoints.
struct Checkpoint {
  NetworkSpec spec;
  Parametrization kind = Parametrization::canonical;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<AffineParams> layers;
  WhiteningCoeffs whitening;  // empty for canonical checkpoints
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prong

#endif  // PRONG_CHECKPOINT_HPP
