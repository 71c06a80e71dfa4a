/*
 * Copyright 2026 The solgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace solgp {

// Root of every error the library throws. Callers that only want to
// report and exit can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// A required value (fitted cell, grid corner, simulator output) is absent.
class CoverageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Covariance could not be factorized, even after jitter escalation.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public Error {
 public:
  using Error::Error;
};

class InfeasibleDesignError : public Error {
 public:
  using Error::Error;
};

class OutOfCellError : public Error {
 public:
  using Error::Error;
};

// The requested comparator cannot run on the requested inputs, e.g. it
// needs true simulator output on an off-station grid.
class InfeasibleComparatorError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  FitError(const std::string& what, std::vector<std::string> diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

}  // namespace solgp
