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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace usdf {

using Vec3 = Eigen::Vector3d;

// Error taxonomy. The CLI maps each family onto an exit code:
// UsageError -> 1, DataError -> 2, NumericError -> 3.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Derives an independent stream seed from a root seed and a stream tag.
/// Every module draws its randomness through this so one root seed fixes a run.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

// Smallest variance any latent Gaussian may carry.
inline constexpr double kVarFloor = 1e-6;

}  // namespace usdf
