// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace slicekit {

// Error classes map onto distinct CLI exit codes (usage errors use 2).
enum class ErrorClass : int {
  kParse = 3,
  kShape = 4,
  kSplit = 5,
  kPlan = 6,
  kNetwork = 7,
  kTraining = 8,
  kIo = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& detail)
      : std::runtime_error(kind + ": " + detail), cls_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }
  // Short machine-readable name, e.g. "ShapeMismatch".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

#define SLICEKIT_ERROR_TYPE(Name, Class)                         \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& detail)                     \
        : Error(ErrorClass::Class, #Name, detail) {}             \
  };

SLICEKIT_ERROR_TYPE(ParseError, kParse)
SLICEKIT_ERROR_TYPE(UnknownSpec, kParse)
SLICEKIT_ERROR_TYPE(VersionMismatch, kIo)
SLICEKIT_ERROR_TYPE(IoError, kIo)
SLICEKIT_ERROR_TYPE(ShapeMismatch, kShape)
SLICEKIT_ERROR_TYPE(ShapeError, kShape)
SLICEKIT_ERROR_TYPE(OddSpatialDims, kShape)
SLICEKIT_ERROR_TYPE(MissingWeights, kShape)
SLICEKIT_ERROR_TYPE(NotTlEligible, kSplit)
SLICEKIT_ERROR_TYPE(InvalidSplit, kSplit)
SLICEKIT_ERROR_TYPE(SplitMismatch, kSplit)
SLICEKIT_ERROR_TYPE(NoFeasiblePlan, kPlan)
SLICEKIT_ERROR_TYPE(ConnectionClosed, kNetwork)
SLICEKIT_ERROR_TYPE(TransportError, kNetwork)
SLICEKIT_ERROR_TYPE(Timeout, kNetwork)
SLICEKIT_ERROR_TYPE(ServerError, kNetwork)
SLICEKIT_ERROR_TYPE(BindError, kNetwork)
SLICEKIT_ERROR_TYPE(ClockError, kIo)
SLICEKIT_ERROR_TYPE(DivergedLoss, kTraining)
SLICEKIT_ERROR_TYPE(InvalidArgument, kParse)

#undef SLICEKIT_ERROR_TYPE

}  // namespace slicekit
