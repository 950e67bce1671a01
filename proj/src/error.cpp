#include "soel/error.hpp"

namespace soel {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::NonmonotonicTimestampOverflow: return "NonmonotonicTimestampOverflow";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SourceSmallerThanTarget: return "SourceSmallerThanTarget";
    case Errc::StreamShorterThanWindow: return "StreamShorterThanWindow";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::InvalidStream: return "InvalidStream";
    case Errc::DecayOutOfRange: return "DecayOutOfRange";
    case Errc::Overflow: return "Overflow";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidNetwork: return "InvalidNetwork";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::OffsetUnderflow: return "OffsetUnderflow";
    case Errc::PresentationTooShort: return "PresentationTooShort";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::NoFinalDense: return "NoFinalDense";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "IoError";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
  }
  return "Unknown";
}

}  // namespace soel
