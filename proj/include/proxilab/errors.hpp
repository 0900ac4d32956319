#pragma once

#include <stdexcept>
#include <string>

namespace proxilab {

// Argument errors use std::invalid_argument directly; the types below name
// the domain failures callers are expected to catch individually.

class OutsideRoom : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateScenario : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace proxilab
