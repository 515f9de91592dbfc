/// Name resolution, type checking, qualifier legality and activity analysis.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "adc/ast.hpp"

namespace adc {

enum class SymbolKind { Param, Local, LoopVar, Builtin };

struct Symbol {
  SymbolKind kind{};
  ValType type = ValType::Real;
  SourcePos pos{};
  int param_index = -1;
};

struct SymbolTable {
  std::map<std::string, Symbol> symbols;

  const Symbol* find(const std::string& name) const;
};

/// Resolves every reference in f and type-checks the body. The DSL has one
/// flat per-function namespace: redeclaration anywhere in the function is an
/// error. Throws Error(Semantic).
SymbolTable resolve(const FunctionDef& f);

/// Qualifier set a generated derivative of f must carry. Differentiating a
/// kernel entry point is rejected.
QualSet propagate_qualifiers(const FunctionDef& f);

/// Variables that transitively depend on the given independent parameters.
/// Flow-insensitive least fixed point; integer-typed values are never active;
/// arrays are tracked whole (any active element makes the array active).
using ActivitySet = std::set<std::string>;
ActivitySet activity(const FunctionDef& f, const std::vector<std::string>& wrt);

/// Module-level checks in addition to per-function resolve: unique function
/// names, call statements target existing void non-global functions with
/// matching argument shapes, and device/global callers only call
/// device-qualified callees.
void check_module(const Module& m);

/// True when the body can reach a `return` along every path; used for the
/// exactly-one-return-per-path rule on real-valued functions.
bool block_definitely_returns(const Block& b);

}  // namespace adc
