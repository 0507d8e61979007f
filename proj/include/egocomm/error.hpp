#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egocomm {

enum class ErrorCode {
  // ingestion
  MalformedRow,
  NonMonotoneFrameIndex,
  TooManyFrames,
  UnknownEnumLevel,
  DuplicateParticipantId,
  DanglingRecordingRef,
  MalformedManifest,
  InvalidShift,
  InvalidPosteriors,
  InvalidSurvey,
  // diarizer
  ShapeMismatch,
  NonFiniteLoss,
  EmptyDataset,
  TooShort,
  BadCheckpoint,
  // metrics / behavior / arousal
  LengthMismatch,
  NoReferenceSpeech,
  EmptyList,
  MissingLabels,
  UnsortedInput,
  ZeroDuration,
  NoShifts,
  InsufficientData,
  DegenerateScores,
  EmptyHalf,
  NoData,
  // stats
  RankDeficientDesign,
  TooFewObservations,
  ConstantInput,
  DomainError,
  // synth / cli
  BadConfig,
  ConfigError,
  MissingPrerequisite,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotoneFrameIndex: return "NonMonotoneFrameIndex";
    case ErrorCode::TooManyFrames: return "TooManyFrames";
    case ErrorCode::UnknownEnumLevel: return "UnknownEnumLevel";
    case ErrorCode::DuplicateParticipantId: return "DuplicateParticipantId";
    case ErrorCode::DanglingRecordingRef: return "DanglingRecordingRef";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::InvalidShift: return "InvalidShift";
    case ErrorCode::InvalidPosteriors: return "InvalidPosteriors";
    case ErrorCode::InvalidSurvey: return "InvalidSurvey";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoReferenceSpeech: return "NoReferenceSpeech";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::NoShifts: return "NoShifts";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateScores: return "DegenerateScores";
    case ErrorCode::EmptyHalf: return "EmptyHalf";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingPrerequisite: return "MissingPrerequisite";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Process exit codes used by the command-line driver.
enum class ExitCode : int { Ok = 0, Config = 2, Data = 3, Numeric = 4 };

inline constexpr ExitCode exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig:
    case ErrorCode::ConfigError:
      return ExitCode::Config;
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::RankDeficientDesign:
    case ErrorCode::DomainError:
    case ErrorCode::DegenerateScores:
      return ExitCode::Numeric;
    default:
      return ExitCode::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace egocomm
