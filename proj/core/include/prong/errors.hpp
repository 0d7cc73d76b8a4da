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

#ifndef PRONG_ERRORS_HPP
#define PRONG_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prong {

// Base class for every error raised by the library. Callers that do not care
// about the failure category can catch this alone.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of operands do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An iterative routine hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be inverted is (numerically) singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A trace or state object does not belong to the model it is used with.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class TooLargeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InsufficientBatchError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input. Carries the byte offset at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace prong

#endif  // PRONG_ERRORS_HPP
