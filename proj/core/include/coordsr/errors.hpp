#pragma once

#include <stdexcept>
#include <string>

namespace coordsr {

/// Invalid configuration: shapes that do not conform, bad config fields,
/// unsupported dimensions. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: calling an operation in a state or with a mode it does not
/// support (second backward, querying a fixed-scale model at another scale).
/// The CLI maps this to exit code 2.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// NaN or Inf produced where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coordsr
