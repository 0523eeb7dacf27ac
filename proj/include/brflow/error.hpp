#pragma once

#include <stdexcept>
#include <string>

namespace brflow {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or degenerate mesh input.
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Failure while factorizing or solving a linear system.
class SolveError : public Error {
 public:
  using Error::Error;
};

/// Bad user configuration (CLI flags, config files, unknown case ids).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace brflow
