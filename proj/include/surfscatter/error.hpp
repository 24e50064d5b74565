#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace surfscatter {

/// Failure categories raised by the library. The CLI maps every one of these
/// to exit code 2 (data/config error); anything else is an internal failure.
enum class ErrorCode {
  MissingColumn,
  MalformedRow,
  EmptyCloud,
  NegativeIntensity,
  DuplicateMaterial,
  InvalidManifest,
  FileUnreadable,
  DegenerateCloud,
  InvalidArgument,
  ZeroHorizontalRange,
  AllZeroIntensities,
  EmptyPatch,
  EmptyTrainingSet,
  SingleClassTrainingSet,
  DimensionMismatch,
  DegenerateFeature,
  KTooLarge,
  UnknownTestSurface,
  InvalidSplit,
  SingleClassLabels,
  GrazingIncidence,
  InvalidSpec,
  InvalidModel,
  InvalidConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NegativeIntensity: return "NegativeIntensity";
    case ErrorCode::DuplicateMaterial: return "DuplicateMaterial";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroHorizontalRange: return "ZeroHorizontalRange";
    case ErrorCode::AllZeroIntensities: return "AllZeroIntensities";
    case ErrorCode::EmptyPatch: return "EmptyPatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateFeature: return "DegenerateFeature";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::UnknownTestSurface: return "UnknownTestSurface";
    case ErrorCode::InvalidSplit: return "InvalidSplit";
    case ErrorCode::SingleClassLabels: return "SingleClassLabels";
    case ErrorCode::GrazingIncidence: return "GrazingIncidence";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace surfscatter
