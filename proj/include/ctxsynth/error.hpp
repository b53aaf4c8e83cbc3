#pragma once

#include <stdexcept>
#include <string>

namespace ctxsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or invalid configuration (unknown engine, missing credential, bad preset).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. Carries the offending file and 1-based line when known.
class InputError : public Error {
 public:
  InputError(const std::string& message, std::string file = {}, std::size_t line = 0)
      : Error(format(message, file, line)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& message, const std::string& file, std::size_t line) {
    std::string out;
    if (!file.empty()) out += file + ":";
    if (line != 0) out += std::to_string(line) + ":";
    if (!out.empty()) out += " ";
    return out + message;
  }

  std::string file_;
  std::size_t line_;
};

/// An engine response that does not follow the requested output format.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure talking to a completion endpoint.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status = 0) : Error(message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace ctxsynth
