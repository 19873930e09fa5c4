#include "tadil/error.hpp"

namespace tadil {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NoClusters: return "NoClusters";
    case Errc::DegenerateBandwidth: return "DegenerateBandwidth";
    case Errc::TooFewNeighbors: return "TooFewNeighbors";
    case Errc::DuplicateTask: return "DuplicateTask";
    case Errc::EmptyClassifier: return "EmptyClassifier";
    case Errc::NoActiveTask: return "NoActiveTask";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Corrupt: return "Corrupt";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

Error::Error(Errc code, const std::string& what, std::uint64_t byte_offset)
    : std::runtime_error(std::string(to_string(code)) + ": " + what + " (at byte " +
                         std::to_string(byte_offset) + ")"),
      code_(code),
      offset_(byte_offset) {}

}  // namespace tadil
