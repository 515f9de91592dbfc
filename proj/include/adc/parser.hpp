#pragma once

#include <optional>
#include <string_view>

#include "adc/ast.hpp"
#include "adc/diag.hpp"

namespace adc {

struct ParseResult {
  std::optional<Module> module;
  std::optional<Diagnostic> error;

  bool ok() const { return module.has_value(); }
};

/// Parses DSL source text. Never throws: malformed input produces a located
/// diagnostic with the expected-token description.
ParseResult parse(std::string_view source);

/// Convenience for inputs that are known to be well-formed (corpus files,
/// generated derivative code). Throws Error(Semantic) on failure.
Module parse_or_throw(std::string_view source);

}  // namespace adc
