// Copyright 2026 The tradeoff-sr Authors
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
#include <string_view>

namespace tsr {

enum class ErrorCode {
  MissingFile,
  UnsupportedFormat,
  IoFailure,
  DegenerateOutput,
  PatchTooLarge,
  EvenSize,
  ShapeNotDivisible,
  EmptyCorpus,
  ShapeMismatch,
  RankMismatch,
  ReversedInterval,
  InvalidArgument,
  NonFiniteGradient,
  NonFiniteLoss,
  EmptyData,
  EmptySet,
  LengthMismatch,
  TooSmall,
  ParseError,
  ValidationError,
  ChecksumMismatch,
  VersionUnsupported,
  UnknownSubcommand,
  UsageError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so the
// CLI and the service can map it to a stable, machine-parsable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tsr
