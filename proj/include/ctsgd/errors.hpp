// Copyright 2026 The ctsgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctsgd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInterval : public Error {
 public:
  using Error::Error;
};

class NonPeriodicHorizonTooShort : public Error {
 public:
  using Error::Error;
};

class DecayNotObserved : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class UnboundedRegion : public Error {
 public:
  using Error::Error;
};

class MissingCertificate : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class NonPositiveGap : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `field()` holds the dotted path of the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised by the integrator when a state coordinate becomes non-finite or
/// exceeds the divergence threshold.
class NonFiniteState : public Error {
 public:
  NonFiniteState(std::size_t step, std::size_t agent, double magnitude)
      : Error("state diverged at step " + std::to_string(step) + ", agent " +
              std::to_string(agent) + " (|x| = " + std::to_string(magnitude) + ")"),
        step_(step),
        agent_(agent),
        magnitude_(magnitude) {}

  std::size_t step() const noexcept { return step_; }
  std::size_t agent() const noexcept { return agent_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  std::size_t step_;
  std::size_t agent_;
  double magnitude_;
};

/// More than the tolerated fraction of ensemble paths diverged.
class DivergenceCeilingExceeded : public Error {
 public:
  DivergenceCeilingExceeded(std::size_t diverged, std::size_t runs)
      : Error(std::to_string(diverged) + " of " + std::to_string(runs) +
              " paths diverged (ceiling is 1%)"),
        diverged_(diverged),
        runs_(runs) {}

  std::size_t diverged() const noexcept { return diverged_; }
  std::size_t runs() const noexcept { return runs_; }

 private:
  std::size_t diverged_;
  std::size_t runs_;
};

}  // namespace ctsgd
