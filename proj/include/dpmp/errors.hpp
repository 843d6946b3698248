// Copyright 2026 The dpmp Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPMP_ERRORS_HPP
#define DPMP_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace dpmp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation of a sampled function outside its grid.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// Inconsistent vector or matrix sizes.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid problem or solver configuration (bad delays, free time with
/// control delay, non-coercive weights, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An integrated trajectory left the finite range or the state bound.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

/// Forward-backward sweep did not reach its fixed-point tolerance.
class SweepDiverged : public Error {
 public:
  SweepDiverged(const std::string& what, std::vector<double> defects)
      : Error(what), defects_(std::move(defects)) {}
  const std::vector<double>& defects() const noexcept { return defects_; }

 private:
  std::vector<double> defects_;
};

/// Newton iteration on the shooting map failed to reach tolerance.
class NewtonStalled : public Error {
 public:
  NewtonStalled(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace dpmp

#endif  // DPMP_ERRORS_HPP
