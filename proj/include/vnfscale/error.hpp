// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vnfscale {

enum class Errc {
  Disconnected,
  SelfLoop,
  DuplicateLink,
  NoDeployableNode,
  InvalidNodeId,
  UnknownNode,
  ShapeMismatch,
  EmptyRequestSet,
  UnroutableReference,
  ExactModeTooLarge,
  NonScalarLoss,
  OddDim,
  TableMismatch,
  VersionMismatch,
  CorruptCheckpoint,
  EmptyBuffer,
  PhaseMisalignment,
  UnknownEntry,
  InvalidArgument,
  ParseError,
  Io,
};

std::string_view to_string(Errc code);

/// Every failure in the library is reported as an Error carrying a code that
/// callers (tests, the CLI) can branch on.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vnfscale
