#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refocus {

enum class ErrorCode {
  ConfigError,
  ParseFailed,
  CoordinateError,
  RepairFailed,
  DimensionMismatch,
  LambdaOutOfRange,
  UnscoredCandidate,
  EmbedderFailed,
  GeneratorUnavailable,
  GenerationFailed,
  RefinerUnavailable,
  RefinerFailed,
  LayoutPhaseFailed,
  AllGenerationFailed,
  EmptyRun,
  ManifestError,
  InvalidArgument,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseFailed: return "ParseFailed";
    case ErrorCode::CoordinateError: return "CoordinateError";
    case ErrorCode::RepairFailed: return "RepairFailed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::UnscoredCandidate: return "UnscoredCandidate";
    case ErrorCode::EmbedderFailed: return "EmbedderFailed";
    case ErrorCode::GeneratorUnavailable: return "GeneratorUnavailable";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::RefinerUnavailable: return "RefinerUnavailable";
    case ErrorCode::RefinerFailed: return "RefinerFailed";
    case ErrorCode::LayoutPhaseFailed: return "LayoutPhaseFailed";
    case ErrorCode::AllGenerationFailed: return "AllGenerationFailed";
    case ErrorCode::EmptyRun: return "EmptyRun";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Process exit status for a failed CLI command, one per error category.
constexpr int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError: return 2;
    case ErrorCode::ParseFailed:
    case ErrorCode::CoordinateError: return 3;
    case ErrorCode::RepairFailed: return 4;
    case ErrorCode::LayoutPhaseFailed: return 5;
    case ErrorCode::AllGenerationFailed: return 6;
    case ErrorCode::ManifestError:
    case ErrorCode::EmptyRun: return 7;
    case ErrorCode::GeneratorUnavailable:
    case ErrorCode::RefinerUnavailable:
    case ErrorCode::EmbedderFailed:
    case ErrorCode::GenerationFailed:
    case ErrorCode::RefinerFailed: return 8;
    case ErrorCode::IoError: return 9;
    default: return 1;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace refocus
