#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clickprep {

enum class ErrorCode {
  // record validation
  MissingIdentity,
  MalformedTimestamp,
  HitWithoutProducts,
  NegativePrice,
  MalformedRecord,
  DuplicateEventId,
  // ingest
  UnreadableStream,
  UnknownFormat,
  MissingRate,
  InvalidRateTable,
  // statistics
  EmptyPopulation,
  InsufficientPopulation,
  InvalidParams,
  NoUnimodalLimit,
  // behavior / journey / metrics
  NoPurchases,
  InsufficientData,
  AlarmRefusal,
  NoHits,
  MissingPrice,
  InsufficientCells,
  // validation
  SeriesTooShort,
  // synth / pipeline
  InfeasibleConfig,
  ConfigInvalid,
  StageFailure,
  PortBusy,
  NoPopulationLoaded,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping, Python exceptions) can branch
/// on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace clickprep
