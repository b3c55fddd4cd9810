// Copyright 2026 The dpacct Authors
//
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

#ifndef DPACCT_ERRORS_HPP_
#define DPACCT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dpacct {

// Bad user-supplied parameters or config (CLI exit code 2).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Requested delta is below the floating-point floor of 1e-10 (exit code 3).
class PrecisionFloorError : public std::invalid_argument {
 public:
  explicit PrecisionFloorError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Unreadable/unwritable files (exit code 4).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// An internal numerical sanity check tripped, e.g. the FFT produced more
// negative mass than roundoff can explain (exit code 5).
class NumericalGuardError : public std::runtime_error {
 public:
  explicit NumericalGuardError(const std::string& what)
      : std::runtime_error(what) {}
};

// The minimum delta this library will compute with.  Below this level double
// precision roundoff in the convolution and prefix sums is no longer
// negligible relative to the answer.
inline constexpr double kDeltaFloor = 1e-10;

}  // namespace dpacct

#endif  // DPACCT_ERRORS_HPP_
