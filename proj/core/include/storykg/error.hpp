#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace storykg {

// Every failure the engine reports maps to exactly one of these codes. The
// string form (to_string) is the machine-readable code used on the wire.
enum class ErrorCode {
  MalformedEntry,
  UnknownEntryId,
  InvalidField,
  MissingPlaceholder,
  BackendUnavailable,
  BackendRejected,
  Timeout,
  ExtractionEmpty,
  EmptyScene,
  WrongPhase,
  EmptyGroup,
  AllZeroDifferences,
  InvalidSpec,
  InvalidArgument,
  StorageFailure,
  NotFound,
  Busy,
  CorruptLog,
};

std::string_view to_string(ErrorCode code) noexcept;
bool parse_error_code(std::string_view name, ErrorCode& out) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// A grammar violation in one knowledge-graph line.
class MalformedEntryError : public Error {
 public:
  MalformedEntryError(std::string line, std::size_t offset, std::string reason, std::size_t line_number = 0);

  const std::string& line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }
  // 1-based; 0 when the error did not come from a multi-line block.
  std::size_t line_number() const noexcept { return line_number_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string line_;
  std::size_t offset_;
  std::string reason_;
  std::size_t line_number_;
};

struct FieldDiagnostic {
  std::size_t command_index = 0;
  std::string field;
  std::string message;
};

// Raised by apply_edits; carries one diagnostic per offending command.
class EditRejected : public Error {
 public:
  EditRejected(ErrorCode code, std::vector<FieldDiagnostic> diagnostics);

  const std::vector<FieldDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<FieldDiagnostic> diagnostics_;
};

class CorruptLogError : public Error {
 public:
  CorruptLogError(std::size_t record_index, const std::string& message)
      : Error(ErrorCode::CorruptLog, message), record_index_(record_index) {}

  std::size_t record_index() const noexcept { return record_index_; }

 private:
  std::size_t record_index_;
};

}  // namespace storykg
