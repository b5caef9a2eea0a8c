#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fashrank {

enum class ErrorCode {
  kInvalidConfig,
  kInvalidArgument,
  kNotEnoughItems,
  kAllPairsReserved,
  kDuplicateItem,
  kUnknownItem,
  kUnknownSession,
  kStaleTicket,
  kConflict,
  kCorruptLog,
  kUnknownDimension,
  kLengthMismatch,
  kDegenerateInput,
  kTooFewItems,
  kOutOfRange,
  kKeyMismatch,
  kNonFiniteInput,
  kNonFiniteLatent,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// service layer can map it onto an HTTP status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class CorruptLog : public Error {
 public:
  CorruptLog(std::int64_t seq, const std::string& message)
      : Error(ErrorCode::kCorruptLog,
              "corrupt log at seq " + std::to_string(seq) + ": " + message),
        seq_(seq) {}

  std::int64_t seq() const noexcept { return seq_; }

 private:
  std::int64_t seq_;
};

// Guidance step failures report the schedule index that blew up.
class GuidanceStepError : public Error {
 public:
  GuidanceStepError(std::size_t step, const std::string& message)
      : Error(ErrorCode::kNonFiniteLatent,
              "guidance step " + std::to_string(step) + ": " + message),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace fashrank
