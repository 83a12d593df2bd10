#pragma once

#include <stdexcept>
#include <string>

namespace profilelab {

/// Argument outside the mathematical domain of an operation (lambda in N_C,
/// c outside the achievable gradient range, unknown preset, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A configured size cap (arena nodes, enumerated histories) would be exceeded.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// Root finding or quadrature failed to converge.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace profilelab
