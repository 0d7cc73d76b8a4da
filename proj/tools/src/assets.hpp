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

#ifndef PRONG_CLI_ASSETS_HPP
#define PRONG_CLI_ASSETS_HPP

#include <span>
#include <string_view>

// Files compiled into the driver: the config schema and the presets.
namespace prong::cli::assets {

struct Preset {
  std::string_view name;
  std::string_view text;
};

std::string_view config_schema_text();
std::span<const Preset> presets();

}  // namespace prong::cli::assets

#endif  // PRONG_CLI_ASSETS_HPP
