#pragma once

#include <stdexcept>
#include <string>

namespace tactwin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (non-finite angle,
/// negative force, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameter block or command-line configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A contact scenario that cannot be simulated (footprint leaves the active
/// area, degenerate probe dimensions).
class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// simOTA could not produce a valid assignment.
class AssignmentError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Forward-model sweep violated the monotonicity a calibration relies on.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Calibration built for a different simulator/decoder configuration.
class StaleCalibrationError : public CalibrationError {
 public:
  StaleCalibrationError(std::string expected, std::string found)
      : CalibrationError("stale calibration: config hash " + expected +
                         " does not match calibration hash " + found),
        expected_(std::move(expected)),
        found_(std::move(found)) {}

  const std::string& expected_hash() const { return expected_; }
  const std::string& calibration_hash() const { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace tactwin
