// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include "vnfscale/error.hpp"
#include "vnfscale/rng.hpp"

namespace vnfscale {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::Disconnected: return "Disconnected";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::DuplicateLink: return "DuplicateLink";
    case Errc::NoDeployableNode: return "NoDeployableNode";
    case Errc::InvalidNodeId: return "InvalidNodeId";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyRequestSet: return "EmptyRequestSet";
    case Errc::UnroutableReference: return "UnroutableReference";
    case Errc::ExactModeTooLarge: return "ExactModeTooLarge";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::OddDim: return "OddDim";
    case Errc::TableMismatch: return "TableMismatch";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::EmptyBuffer: return "EmptyBuffer";
    case Errc::PhaseMisalignment: return "PhaseMisalignment";
    case Errc::UnknownEntry: return "UnknownEntry";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw Error(Errc::ParseError, "invalid rng state");
}

}  // namespace vnfscale
