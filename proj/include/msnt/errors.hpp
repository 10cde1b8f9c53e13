#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace msnt {

// Invalid hyperparameters or mismatched components.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data. Carries the individual offenders.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), details_(std::move(details)) {}
  const std::vector<std::string>& details() const { return details_; }

 private:
  std::vector<std::string> details_;
};

}  // namespace msnt
