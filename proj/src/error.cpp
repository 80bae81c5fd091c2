#include "simtutor/error.hpp"

namespace simtutor {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::DuplicateEvent: return "DuplicateEvent";
    case ErrorKind::InconsistentWorkbook: return "InconsistentWorkbook";
    case ErrorKind::InvalidCounts: return "InvalidCounts";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownUser: return "UnknownUser";
    case ErrorKind::UnknownExercise: return "UnknownExercise";
    case ErrorKind::UnknownWorkbook: return "UnknownWorkbook";
    case ErrorKind::DuplicateUser: return "DuplicateUser";
    case ErrorKind::DuplicateExercise: return "DuplicateExercise";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::RaggedFeatures: return "RaggedFeatures";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::EpisodeDone: return "EpisodeDone";
    case ErrorKind::ExerciseNotAvailable: return "ExerciseNotAvailable";
    case ErrorKind::NoCandidates: return "NoCandidates";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace simtutor
