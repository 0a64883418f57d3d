#pragma once

#include <stdexcept>
#include <string>

namespace mlrank {

/// Bad user input: malformed config, unreadable file, invalid dataset row.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Training or optimization hit a non-finite value and cannot continue.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mlrank
