#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sgseg {

enum class ErrorCode {
  MissingColumn,
  UnparsableRow,
  EmptyFile,
  EmptyTable,
  KTooLarge,
  InvalidRange,
  UnknownLabel,
  DimensionMismatch,
  NoEligiblePairs,
  TooFewMolecules,
  InstanceTooLarge,
  DegenerateData,
  EmptySet,
  Requires2D,
  CellNotInMask,
  AlignmentError,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above.
/// `stage` is filled in by the pipeline so callers can tell where a run died.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  ErrorCode code_;
  std::string stage_;
};

/// Thrown by load_molecules; row is 1-based over data rows (header excluded).
class UnparsableRow : public Error {
 public:
  UnparsableRow(std::size_t row, const std::string& detail)
      : Error(ErrorCode::UnparsableRow,
              "unparsable row " + std::to_string(row) + ": " + detail),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace sgseg
