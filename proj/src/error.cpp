#include "pclmp/error.hpp"

namespace pclmp {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::InsufficientClusters: return "InsufficientClusters";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::InvalidIndex: return "InvalidIndex";
    case Errc::NonPositiveTau: return "NonPositiveTau";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyMemory: return "EmptyMemory";
    case Errc::InconsistentInput: return "InconsistentInput";
    case Errc::NoRelevantItem: return "NoRelevantItem";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
  }
  return "Unknown";
}

}  // namespace pclmp
