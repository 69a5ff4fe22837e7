#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pilotwave {

enum class ErrorKind {
  InvalidSlot,
  OverlappingSlots,
  SlotCountMismatch,
  NotFourSlot,
  EmptyKeep,
  KeepAll,
  BadPartition,
  BadMixture,
  ZeroNorm,
  NonOrthogonalBranches,
  NoSupportingBranch,
  NullRegion,
  NonDisjointOutputs,
  PointerNotReady,
  PacketNotReady,
  StructureMismatch,
  DomainMismatch,
  AmbiguousReadout,
  ZeroConditionalDensity,
  NonUnitary,
  InvalidArgument,
  Parse,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is a
/// stable machine-readable tag; the message carries the diagnostics.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pilotwave
