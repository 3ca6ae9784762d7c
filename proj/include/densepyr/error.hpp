#ifndef DENSEPYR_ERROR_HPP
#define DENSEPYR_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace densepyr {

enum class ErrorKind {
  InvalidArgument,
  EmptySchedule,
  EmptyFeatureBox,
  UnsupportedFormat,
  CorruptFile,
  ZeroOutputDim,
  AlreadyCentered,
  LevelTooLarge,
  DimMismatch,
  InputTooSmall,
  WrongPatchSize,
  UnknownPreset,
  BadLevel,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptySchedule: return "EmptySchedule";
    case ErrorKind::EmptyFeatureBox: return "EmptyFeatureBox";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::ZeroOutputDim: return "ZeroOutputDim";
    case ErrorKind::AlreadyCentered: return "AlreadyCentered";
    case ErrorKind::LevelTooLarge: return "LevelTooLarge";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::InputTooSmall: return "InputTooSmall";
    case ErrorKind::WrongPatchSize: return "WrongPatchSize";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::BadLevel: return "BadLevel";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; what() is
/// "<Kind>: <detail>" so command-line callers can print it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

}  // namespace densepyr

#endif  // DENSEPYR_ERROR_HPP
