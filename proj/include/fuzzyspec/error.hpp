// Copyright 2026 The fuzzyspec Authors.
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

#ifndef FUZZYSPEC_ERROR_HPP
#define FUZZYSPEC_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace fuzzyspec {

enum class ErrorCode {
  kAllZero,
  kNegativeWeight,
  kInvalidDistribution,
  kNonPositiveTemperature,
  kVocabMismatch,
  kTokenOutOfRange,
  kTimeout,
  kProtocolViolation,
  kRemoteError,
  kZeroDraftProbability,
  kDegenerateResidual,
  kEnumerationTooLarge,
  kDomainMismatch,
  kParseError,
  kInsufficientCorpus,
  kInvalidArgument,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAllZero: return "AllZero";
    case ErrorCode::kNegativeWeight: return "NegativeWeight";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kTokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kRemoteError: return "RemoteError";
    case ErrorCode::kZeroDraftProbability: return "ZeroDraftProbability";
    case ErrorCode::kDegenerateResidual: return "DegenerateResidual";
    case ErrorCode::kEnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorCode::kDomainMismatch: return "DomainMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind rather than the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_ERROR_HPP
