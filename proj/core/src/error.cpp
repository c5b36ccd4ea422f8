#include "forge/error.hpp"

namespace forge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "IOError";
    case ErrorKind::kSchema: return "SchemaError";
    case ErrorKind::kUnknownDataset: return "UnknownDataset";
    case ErrorKind::kDegenerateSplit: return "DegenerateSplit";
    case ErrorKind::kEmptyQuestion: return "EmptyQuestion";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kEmptyStatementSet: return "EmptyStatementSet";
    case ErrorKind::kEmptyMustHave: return "EmptyMustHave";
    case ErrorKind::kClient: return "ClientError";
    case ErrorKind::kProtocol: return "ProtocolError";
    case ErrorKind::kEndpointUnavailable: return "EndpointUnavailable";
    case ErrorKind::kPartialSet: return "PartialSet";
    case ErrorKind::kUnknownFixture: return "UnknownFixture";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kMissingLogprobs: return "MissingLogprobs";
    case ErrorKind::kUnknownStep: return "UnknownStep";
    case ErrorKind::kDuplicateRegistration: return "DuplicateRegistration";
    case ErrorKind::kAwaitingTrainer: return "AwaitingTrainer";
    case ErrorKind::kRunLocked: return "RunLocked";
    case ErrorKind::kEmptyGrid: return "EmptyGrid";
    case ErrorKind::kMissingAnswer: return "MissingAnswer";
    case ErrorKind::kDuplicateSubmission: return "DuplicateSubmission";
    case ErrorKind::kUnknownTask: return "UnknownTask";
    case ErrorKind::kIncompleteChoices: return "IncompleteChoices";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind) {}

SchemaError::SchemaError(std::size_t line, std::string field,
                         const std::string& detail)
    : Error(ErrorKind::kSchema, "line " + std::to_string(line) + ", field '" +
                                    field + "': " + detail),
      line_(line),
      field_(std::move(field)) {}

}  // namespace forge
