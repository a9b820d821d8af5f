#pragma once

#include <stdexcept>
#include <string>

namespace lfsep {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every traced ray missed the sensor.
class EmptyFootprint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver produced a non-finite objective.
class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NCC against a constant reference.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lfsep
