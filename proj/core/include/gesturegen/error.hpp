#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gesturegen {

enum class ErrorKind {
  kDimension,
  kParse,
  kGeometry,
  kParameter,
  kIndex,
  kRepresentation,
  kContract,
  kConfig,
  kDataset,
  kNumerical,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind drives
/// the command-line exit code (see tools/).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace gesturegen
