#pragma once

#include <stdexcept>
#include <string>

namespace dm {

// Exit-code categories used by the CLI: 2 config/usage, 3 data/version,
// 4 runtime numeric failure.
enum class ErrorKind { Config = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& name, const std::string& what)
      : std::runtime_error(name + ": " + what), kind_(kind), name_(name) {}

  ErrorKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  ErrorKind kind_;
  std::string name_;
};

#define DM_DEFINE_ERROR(Name, Kind)                          \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& what)                   \
        : Error(ErrorKind::Kind, #Name, what) {}             \
  }

// Simulation
DM_DEFINE_ERROR(OutOfCorridor, Numeric);
DM_DEFINE_ERROR(NonFiniteState, Numeric);
DM_DEFINE_ERROR(MissingAction, Data);
DM_DEFINE_ERROR(InsufficientVehicles, Data);
DM_DEFINE_ERROR(UnknownVehicle, Data);

// Driver models
DM_DEFINE_ERROR(NonPositiveGap, Numeric);
DM_DEFINE_ERROR(DegenerateData, Data);

// Autodiff / networks
DM_DEFINE_ERROR(ShapeMismatch, Numeric);
DM_DEFINE_ERROR(NoForwardPass, Numeric);
DM_DEFINE_ERROR(UnsupportedOpForSecondOrder, Numeric);
DM_DEFINE_ERROR(NonFiniteGradient, Numeric);
DM_DEFINE_ERROR(LayoutMismatch, Data);

// Checkpoints / files
DM_DEFINE_ERROR(CorruptCheckpoint, Data);
DM_DEFINE_ERROR(VersionMismatch, Data);
DM_DEFINE_ERROR(InsufficientData, Data);
DM_DEFINE_ERROR(EpisodeTooShort, Data);
DM_DEFINE_ERROR(EmptySegment, Data);
DM_DEFINE_ERROR(SegmentTooShort, Data);
DM_DEFINE_ERROR(MissingReport, Data);
DM_DEFINE_ERROR(ConfigError, Config);

#undef DM_DEFINE_ERROR

}  // namespace dm
