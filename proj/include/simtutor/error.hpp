#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace simtutor {

enum class ErrorKind {
  MalformedRecord,
  DuplicateEvent,
  InconsistentWorkbook,
  InvalidCounts,
  InvalidArgument,
  UnknownUser,
  UnknownExercise,
  UnknownWorkbook,
  DuplicateUser,
  DuplicateExercise,
  DivergenceDetected,
  EmptyDataset,
  RaggedFeatures,
  LengthMismatch,
  Empty,
  SingleClass,
  InsufficientData,
  EpisodeDone,
  ExerciseNotAvailable,
  NoCandidates,
  VersionMismatch,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and tests)
// can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace simtutor
