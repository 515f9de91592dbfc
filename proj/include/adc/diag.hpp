#pragma once

#include <stdexcept>
#include <string>

#include "adc/ast.hpp"

namespace adc {

struct Diagnostic {
  SourcePos pos{};
  std::string message;

  std::string to_string() const;
};

enum class ErrorKind {
  Semantic,       // name resolution / typing / qualifier legality
  Transform,      // unsupported construct, bad differentiation request
  Eval,           // runtime: domain, arity, index, tape imbalance, overflow
  Launch,         // kernel dispatch misuse or refused hazardous launch
  Io,             // file / CSV problems
};

/// Single exception type used below the parser; the parser itself reports
/// through ParseResult so that malformed input can never unwind a caller.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, SourcePos pos = {});

  ErrorKind kind() const { return kind_; }
  SourcePos pos() const { return pos_; }

 private:
  ErrorKind kind_;
  SourcePos pos_;
};

}  // namespace adc
