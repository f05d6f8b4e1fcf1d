// Copyright 2026 The cqe Authors
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

namespace cqe {

/// Input violates a documented precondition or type invariant.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// A file could not be parsed, or a serialized payload is malformed.
class FormatError : public ContractError {
 public:
  explicit FormatError(const std::string& what) : ContractError(what) {}
};

/// A serialized artifact carries a format_version this build does not read.
class VersionError : public FormatError {
 public:
  explicit VersionError(const std::string& what) : FormatError(what) {}
};

/// Inputs are well-formed but numerically degenerate (zero variance, all
/// residuals zero, every interval unbounded, ...).
class DegenerateError : public std::domain_error {
 public:
  explicit DegenerateError(const std::string& what) : std::domain_error(what) {}
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ContractError(message);
}

}  // namespace detail
}  // namespace cqe
