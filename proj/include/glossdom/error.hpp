#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glossdom {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data, bad arguments, bad configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed line in a data file. line() is 1-based; 0 when not tied to a line.
class ParseError : public InputError {
 public:
  ParseError(std::string source, std::size_t line, std::string field,
             const std::string& what);

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

// Anything that went wrong talking to a scoring backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  TransportError(const std::string& what, int attempts)
      : BackendError(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace glossdom
