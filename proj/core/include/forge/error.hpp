#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

enum class ErrorKind {
  kIo,
  kSchema,
  kUnknownDataset,
  kDegenerateSplit,
  kEmptyQuestion,
  kParse,
  kEmptyStatementSet,
  kEmptyMustHave,
  kClient,
  kProtocol,
  kEndpointUnavailable,
  kPartialSet,
  kUnknownFixture,
  kEmptyInput,
  kMissingLogprobs,
  kUnknownStep,
  kDuplicateRegistration,
  kAwaitingTrainer,
  kRunLocked,
  kEmptyGrid,
  kMissingAnswer,
  kDuplicateSubmission,
  kUnknownTask,
  kIncompleteChoices,
  kInvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the whole library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// A dataset line that failed validation. line is 1-based.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& detail);

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace forge
