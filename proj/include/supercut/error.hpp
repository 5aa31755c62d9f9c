#pragma once

#include <stdexcept>
#include <string>

namespace supercut {

enum class ErrorCode {
  kParse,
  kEmptyScene,
  kInvalidArgument,
  kInvariant,
  kVersionMismatch,
  kTruncated,
  kMissingOracleData,
  kFormat,
  kPlacement,
  kDivergence,
  kIo,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. The code lets callers branch without parsing messages.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace supercut
