#pragma once

#include <stdexcept>
#include <string>

namespace actsom {

/// Coarse error families; the CLI maps them onto exit codes.
enum class ErrorKind {
  shape,
  invalid_input,
  empty_input,
  format,
  header,
  corruption,
  parse,
  index,
  lookup,
  domain,
  consistency,
  spec,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::format: return "format error";
    case ErrorKind::header: return "invalid header";
    case ErrorKind::corruption: return "corrupt data";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::index: return "index error";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::consistency: return "consistency error";
    case ErrorKind::spec: return "spec error";
    case ErrorKind::io: return "I/O error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace actsom
