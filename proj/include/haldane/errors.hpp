#pragma once

#include <stdexcept>
#include <string>

namespace haldane {

/// An argument outside an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An experiment or model configuration that violates a precondition.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An analytic operation requested for a Y law that lacks the closed form it
/// needs (e.g. a generating function for the log-normal family).
class UnsupportedLawError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace haldane
