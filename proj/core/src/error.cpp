#include "gesturegen/error.hpp"

#include <fmt/format.h>

namespace gesturegen {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kGeometry: return "geometry error";
    case ErrorKind::kParameter: return "parameter error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kRepresentation: return "representation error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kDataset: return "dataset error";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorKind::kParse, fmt::format("line {}: {}", line, message)),
      line_(line) {}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, fmt::format("{}: {}", to_string(kind), message));
}

}  // namespace gesturegen
