#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ionlight {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or input file. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A precondition on a domain value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : Error(what), last_good_time_(last_good_time) {}

  double last_good_time() const { return last_good_time_; }

 private:
  double last_good_time_;
};

class DegenerateSteadyState : public Error {
 public:
  DegenerateSteadyState(const std::string& what,
                        std::vector<std::vector<std::string>> closed_sets)
      : Error(what), closed_sets_(std::move(closed_sets)) {}

  // Level labels of every closed (absorbing) set found in the transition graph.
  const std::vector<std::vector<std::string>>& closed_sets() const {
    return closed_sets_;
  }

 private:
  std::vector<std::vector<std::string>> closed_sets_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  // Residual after each reporting interval (solver) or each iteration (fits).
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace ionlight
