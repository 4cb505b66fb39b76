#pragma once

#include <stdexcept>
#include <string>

namespace coxmi {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatchError : Error { using Error::Error; };
struct NoEventsError : Error { using Error::Error; };
struct DivergedError : Error { using Error::Error; };
struct SingularMatrixError : Error { using Error::Error; };
struct DegenerateOutcomeError : Error { using Error::Error; };
struct EmptyCompleteSetError : Error { using Error::Error; };
struct TooManyFailuresError : Error { using Error::Error; };
struct DegenerateScoreError : Error { using Error::Error; };
struct EmptyDonorPoolError : Error { using Error::Error; };
struct ImputationError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// CSV ingestion errors; messages carry row/column context.
struct ParseError : IoError { using IoError::IoError; };
struct NegativeTimeError : ParseError { using ParseError::ParseError; };
struct UnknownLevelError : ParseError { using ParseError::ParseError; };

}  // namespace coxmi
