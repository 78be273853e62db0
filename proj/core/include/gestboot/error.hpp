#pragma once

#include <stdexcept>
#include <string>

namespace gestboot {

// Base for everything thrown by this library. The CLI maps subclasses to
// exit codes: UsageError/ConfigError -> 1, data errors -> 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Preconditions violated by a caller (bad dimensions, out-of-range values).
struct InvalidInputError : Error {
  using Error::Error;
};

// File could not be opened, read or written.
struct IoError : Error {
  using Error::Error;
};

// File opened fine but its contents are malformed.
struct FormatError : Error {
  using Error::Error;
};

// Bad key/value in a run configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Bad command-line usage.
struct UsageError : Error {
  using Error::Error;
};

}  // namespace gestboot
