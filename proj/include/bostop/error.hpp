// Copyright 2026 The bostop Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bostop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  OutOfBounds(std::size_t dim, const std::string& what)
      : Error("value out of bounds in dimension " + std::to_string(dim) + ": " + what), dim_(dim) {}
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t expected, std::size_t got)
      : Error("length mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class FactorizationFailure : public Error {
 public:
  using Error::Error;
};

class NegativeVariance : public Error {
 public:
  explicit NegativeVariance(double v)
      : Error("negative predictive variance: " + std::to_string(v)) {}
};

class MissingInput : public Error {
 public:
  MissingInput(const std::string& kind, const std::string& field)
      : Error("criterion '" + kind + "' requires input '" + field + "'"),
        kind_(kind),
        field_(field) {}
  const std::string& kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  std::string kind_;
  std::string field_;
};

class BadFoldCount : public Error {
 public:
  BadFoldCount(std::size_t n, std::size_t k)
      : Error("bad fold count k=" + std::to_string(k) + " for n=" + std::to_string(n)) {}
};

class NotAvailable : public Error {
 public:
  using Error::Error;
};

class BadTimes : public Error {
 public:
  using Error::Error;
};

class SubprocessError : public Error {
 public:
  SubprocessError(int exit_code, std::string stderr_excerpt, const std::string& what)
      : Error(with_excerpt(what, stderr_excerpt)), exit_code_(exit_code), stderr_excerpt_(std::move(stderr_excerpt)) {}
  int exit_code() const { return exit_code_; }
  const std::string& stderr_excerpt() const { return stderr_excerpt_; }

 private:
  static std::string with_excerpt(const std::string& what, const std::string& err) {
    const auto end = err.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) return what;
    return what + " (stderr: " + err.substr(0, end + 1) + ")";
  }

  int exit_code_;
  std::string stderr_excerpt_;
};

class ReplayExhausted : public Error {
 public:
  using Error::Error;
};

class ReplayMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; field() names the offending key when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
  ConfigError(const std::string& field, const std::string& what) : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace bostop
