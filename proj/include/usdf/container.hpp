// Copyright 2026 The usdf Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Versioned model container: a text header followed by raw little-endian
// float64 payloads. Byte layout is documented in docs/FORMATS.md.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "usdf/tensor.hpp"

namespace usdf {

inline constexpr int kContainerVersion = 1;

struct Container {
  std::string kind;  // "mlp", "decoder", "encoder", "codebook", ...
  int version = kContainerVersion;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::pair<std::string, DenseArray>> arrays;

  void set(std::string key, std::string value);
  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  void add_array(std::string name, DenseArray array);
  const DenseArray& array(std::string_view name) const;
};

void write_container(std::ostream& out, const Container& c);
Container read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

/// Stores the network under `prefix` (layer_dims, activations, seed, w<l>/b<l> arrays).
void put_mlp(Container& c, const MlpModel& model, const std::string& prefix = "");
MlpModel get_mlp(const Container& c, const std::string& prefix = "");

void save_mlp(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_mlp(const std::filesystem::path& path);

}  // namespace usdf
