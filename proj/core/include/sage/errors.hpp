#pragma once

#include <stdexcept>
#include <string>

namespace sage {

// Error taxonomy shared by every module. Codes are stable identifiers:
// the CLI prints them verbatim in its machine-parsable error line.
enum class ErrorCode {
  // seqdata
  UnknownResidue,
  ParseError,
  DuplicateId,
  EmptyDataset,
  // model
  InvalidConfig,
  SequenceTooLong,
  DimensionMismatch,
  IOError,
  CorruptCheckpoint,
  // scoring
  ShapeMismatch,
  NegativeLambda,
  SingleClassDataset,
  // attack
  InvalidDimensions,
  NoBenignExamples,
  // metrics
  SingleClass,
  LengthMismatch,
  NoPositives,
  TooFewSamples,
  IdMismatch,
  // agent
  MissingArtifact,
  ConfigError,
  // report
  EmptyRun,
  BackendUnavailable,
  // cli
  UsageError,
};

const char* error_code_name(ErrorCode code);

class SageError : public std::runtime_error {
 public:
  SageError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw SageError(code, message);
}

}  // namespace sage
