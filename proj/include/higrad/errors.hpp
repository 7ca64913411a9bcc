#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace higrad {

// Exit-code buckets used by the CLI: usage errors are handled by the parser
// (exit 1), config/data errors map to exit 2, numerical failures to exit 3.
enum class ErrorCategory { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)), category_(category) {}

  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string kind_;
  ErrorCategory category_;
};

#define HIGRAD_DEFINE_ERROR(NAME, CATEGORY)              \
  class NAME : public Error {                            \
   public:                                               \
    explicit NAME(const std::string& message)            \
        : Error(#NAME, ErrorCategory::CATEGORY, message) {} \
  }

HIGRAD_DEFINE_ERROR(ConstraintViolation, config);
HIGRAD_DEFINE_ERROR(BadBranching, config);
HIGRAD_DEFINE_ERROR(BadLength, config);
HIGRAD_DEFINE_ERROR(LengthMismatch, config);
HIGRAD_DEFINE_ERROR(ConfigMismatch, config);
HIGRAD_DEFINE_ERROR(BadDimension, config);
HIGRAD_DEFINE_ERROR(DimensionMismatch, config);

HIGRAD_DEFINE_ERROR(MissingSegment, data);
HIGRAD_DEFINE_ERROR(ShardExhausted, data);
HIGRAD_DEFINE_ERROR(ParseError, data);
HIGRAD_DEFINE_ERROR(IoError, data);

HIGRAD_DEFINE_ERROR(DivisionByZero, numerical);
HIGRAD_DEFINE_ERROR(DomainError, numerical);
HIGRAD_DEFINE_ERROR(SingularSigma, numerical);
HIGRAD_DEFINE_ERROR(RankDeficient, numerical);
HIGRAD_DEFINE_ERROR(NonMonotone, numerical);

#undef HIGRAD_DEFINE_ERROR

}  // namespace higrad
