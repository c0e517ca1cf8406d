#pragma once

#include <stdexcept>
#include <string>

namespace so3ae {

// Coarse failure classes. Every throwing path in the library uses Error so the
// C API (and the CLI exit-code table) can map failures without string matching.
enum class ErrorKind {
  Parse,        // malformed file/JSON/flag content
  InvalidArgument,
  Shape,        // signature/dimension mismatch between operands
  Config,       // invalid or inconsistent model/transform configuration
  SelectionRule,// (l1,l2,l3) violating |l1-l2| <= l3 <= l1+l2
  Domain,       // numeric argument outside its mathematical domain
  DataBounds,   // input data outside declared bounds (e.g. point outside ball)
  DegenerateFrame,
  DegenerateScale,
  Numeric,      // non-finite values where finite ones are required
  Io,           // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::SelectionRule: return "selection-rule";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::DataBounds: return "data-bounds";
    case ErrorKind::DegenerateFrame: return "degenerate-frame";
    case ErrorKind::DegenerateScale: return "degenerate-scale";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace so3ae
