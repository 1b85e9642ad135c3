#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coughkit {

/// Every failure the library reports carries one of these kinds.
enum class Errc {
  // audio_io
  MalformedContainer,
  UnsupportedCodec,
  TruncatedData,
  // dsp
  InvalidParams,
  NegativeFrequency,
  InvalidRef,
  // cough_detect
  EmptySignal,
  SyntaxError,
  UnknownFeature,
  CyclicTree,
  InvalidThreshold,
  // segmentation
  InvalidConfig,
  OutOfRange,
  // augment
  InvalidAlpha,
  ShapeMismatch,
  SilentInput,
  RateMismatch,
  // train_eval
  EmptyInput,
  FormatError,
  DimensionMismatch,
  DuplicateId,
  DegenerateDataset,
  MissingClass,
  // pipeline
  Io,
  StageFailure,
};

std::string_view to_string(Errc kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  Errc kind() const noexcept { return kind_; }

 private:
  Errc kind_;
};

}  // namespace coughkit
