#include "adc/diag.hpp"

namespace adc {

std::string Diagnostic::to_string() const {
  return "line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) + ": " +
         message;
}

Error::Error(ErrorKind kind, std::string message, SourcePos pos)
    : std::runtime_error(std::move(message)), kind_(kind), pos_(pos) {}

}  // namespace adc
