#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fbgate {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A truncation or quadrature order failed to stabilize; carries the observed drift.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double drift) : Error(what), drift_(drift) {}
  double drift() const noexcept { return drift_; }

 private:
  double drift_;
};

class PropagationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

}  // namespace fbgate
