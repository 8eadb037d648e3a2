#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otchart {

enum class ErrorCode {
  // input validation
  EmptyParameterList,
  NonPositiveSigma,
  NonUniformGrid,
  NonIncreasingGrid,
  LengthMismatch,
  AllZeroInput,
  ClampedMassExceedsTolerance,
  RaggedRows,
  ParseFailure,
  IoFailure,
  GridMismatch,
  NotNormalized,
  ParameterOutOfRange,
  IndexOutOfRange,
  KTooLarge,
  EmptyDataSet,
  MissingPlan,
  EmptyBundle,
  EmptyReports,
  EmptyBundles,
  DimensionMismatch,
  InvalidConfig,
  MissingArtifact,
  // numerical failure
  DegenerateSupport,
  DegeneratePlan,
  SingularJacobian,
  NonFiniteLoss,
  PushForwardResidual,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyParameterList: return "EmptyParameterList";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::NonIncreasingGrid: return "NonIncreasingGrid";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllZeroInput: return "AllZeroInput";
    case ErrorCode::ClampedMassExceedsTolerance: return "ClampedMassExceedsTolerance";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyDataSet: return "EmptyDataSet";
    case ErrorCode::MissingPlan: return "MissingPlan";
    case ErrorCode::EmptyBundle: return "EmptyBundle";
    case ErrorCode::EmptyReports: return "EmptyReports";
    case ErrorCode::EmptyBundles: return "EmptyBundles";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::DegenerateSupport: return "DegenerateSupport";
    case ErrorCode::DegeneratePlan: return "DegeneratePlan";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::PushForwardResidual: return "PushForwardResidual";
  }
  return "Unknown";
}

/// True for errors caused by the numbers themselves rather than by bad input.
constexpr bool is_numerical(ErrorCode code) {
  return code >= ErrorCode::DegenerateSupport;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The text without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace otchart
