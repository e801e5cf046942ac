#pragma once

#include <stdexcept>
#include <string>

namespace pclmp {

enum class Errc {
  ZeroVector,
  DimMismatch,
  EmptyInput,
  InvalidConfig,
  ParseError,
  IoError,
  InsufficientClusters,
  InvalidParams,
  LengthMismatch,
  EmptyCluster,
  InvalidLabel,
  InvalidIndex,
  NonPositiveTau,
  ShapeMismatch,
  EmptyMemory,
  InconsistentInput,
  NoRelevantItem,
  MissingGroundTruth,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pclmp
