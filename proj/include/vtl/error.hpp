// Copyright 2026 The vtlattice Authors
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

#include <stdexcept>
#include <string>

namespace vtl {

// Base of every error the library throws. Data problems (bad files, invalid
// lattices, unknown words) derive from DataError so a driver can map them to
// a single exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Raised when an operation that requires a valid lattice receives one that
// fails validation.
class InvalidLattice : public DataError {
 public:
  using DataError::DataError;
};

// Malformed corpus, vocabulary, model or CSV record.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : DataError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  // 1-based line number, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Wrong configuration or inconsistent arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vtl
