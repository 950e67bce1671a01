#pragma once

#include <stdexcept>
#include <string>

namespace soel {

enum class Errc {
  MalformedRecord,
  NonmonotonicTimestampOverflow,
  EmptyFile,
  DimensionMismatch,
  SourceSmallerThanTarget,
  StreamShorterThanWindow,
  UnknownClass,
  InvalidStream,
  DecayOutOfRange,
  Overflow,
  ShapeMismatch,
  InvalidNetwork,
  LabelOutOfRange,
  EmptyDataset,
  DivergedLoss,
  OffsetUnderflow,
  PresentationTooShort,
  InsufficientSamples,
  NoFinalDense,
  InvalidConfig,
  Io,
  CorruptCheckpoint,
};

const char* to_string(Errc code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace soel
