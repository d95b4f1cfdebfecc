#pragma once

#include <stdexcept>
#include <string>

namespace vrjp {

// Argument outside the mathematical domain of a function (w <= 0, m <= 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Root finder could not bracket or converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configured resource cap exceeded (node count, vertex count, walk length).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical invariant that must hold on the support of the law was violated.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed experiment spec, offspring law or CLI input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace vrjp
