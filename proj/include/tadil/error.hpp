#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tadil {

enum class Errc {
  InvalidArgument,
  ZeroVector,
  NonFinite,
  DimensionMismatch,
  NoClusters,
  DegenerateBandwidth,
  TooFewNeighbors,
  DuplicateTask,
  EmptyClassifier,
  NoActiveTask,
  UnknownTask,
  EmptyTrainingSet,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  VersionMismatch,
  Corrupt,
  Io,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library. `code()` is stable and intended for
/// programmatic handling; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Error(Errc code, const std::string& what, std::uint64_t byte_offset);

  Errc code() const noexcept { return code_; }
  /// Set for file decoding failures that can be pinned to a position.
  std::optional<std::uint64_t> byte_offset() const noexcept { return offset_; }

 private:
  Errc code_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace tadil
