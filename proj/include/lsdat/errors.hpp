#pragma once

#include <stdexcept>
#include <string>

namespace lsdat {

// Invalid configuration, bad CLI arguments, shape mismatches. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Base for oracle-side failures. CLI exit code 2.
class OracleError : public std::runtime_error {
 public:
  explicit OracleError(const std::string& msg) : std::runtime_error(msg) {}
};

// Remote transport failed after the retry budget was exhausted.
class OracleTransportError : public OracleError {
 public:
  explicit OracleTransportError(const std::string& msg) : OracleError(msg) {}
};

// Replay trace exhausted or queried with an unrecorded image.
class ReplayError : public OracleError {
 public:
  explicit ReplayError(const std::string& msg) : OracleError(msg) {}
};

// File IO and parse failures. CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lsdat
