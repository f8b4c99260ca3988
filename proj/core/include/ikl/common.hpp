#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ikl {

using Vec = std::vector<double>;

/// Input or parameter shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of an operation (time outside the window, t <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A run produced a non-finite value or exceeded the divergence guard.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, checkpoint or dataset description.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_dim(std::size_t got, std::size_t want, const char* what);

}  // namespace ikl
