#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wold {

enum class ErrorCode {
  NonFinite,
  DimensionMismatch,
  Overflow,
  NotHermitian,
  NotIsometric,
  BadWeights,
  NotUnimodular,
  NotLeftInvertible,
  IllConditioned,
  BadParams,
  NotReducing,
  TooManyDirections,
  Parse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotIsometric: return "NotIsometric";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::NotLeftInvertible: return "NotLeftInvertible";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::NotReducing: return "NotReducing";
    case ErrorCode::TooManyDirections: return "TooManyDirections";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wold
