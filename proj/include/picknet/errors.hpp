#pragma once

#include <stdexcept>
#include <string>

namespace picknet {

// Incompatible tensor shapes (messages name both shapes involved).
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a precondition (bad distribution, empty input, ...).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data (bad magic, truncation, header mismatch).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or missing prerequisite artifacts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace picknet
