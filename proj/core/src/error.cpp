#include "coughkit/error.hpp"

namespace coughkit {

std::string_view to_string(Errc kind) noexcept {
  switch (kind) {
    case Errc::MalformedContainer: return "MalformedContainer";
    case Errc::UnsupportedCodec: return "UnsupportedCodec";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::NegativeFrequency: return "NegativeFrequency";
    case Errc::InvalidRef: return "InvalidRef";
    case Errc::EmptySignal: return "EmptySignal";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::CyclicTree: return "CyclicTree";
    case Errc::InvalidThreshold: return "InvalidThreshold";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidAlpha: return "InvalidAlpha";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::SilentInput: return "SilentInput";
    case Errc::RateMismatch: return "RateMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::FormatError: return "FormatError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::DegenerateDataset: return "DegenerateDataset";
    case Errc::MissingClass: return "MissingClass";
    case Errc::Io: return "Io";
    case Errc::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

}  // namespace coughkit
