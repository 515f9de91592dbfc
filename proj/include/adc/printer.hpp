#pragma once

#include <string>

#include "adc/ast.hpp"

namespace adc {

/// Emits DSL source. print is a pure function of the AST and
/// parse(print(m)) is structurally identical to m.
std::string print(const Module& m);
std::string print(const FunctionDef& f);
std::string print_expr(const Expr& e);

/// Shortest round-trip decimal form of a double (to_chars).
std::string format_double(double v);

}  // namespace adc
