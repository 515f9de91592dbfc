/// Source-transformation derivative generators. Both modes first rewrite the
/// body into elementary statements (one arithmetic operation or intrinsic
/// call per assignment, operands reduced to variables, array reads and
/// constants), then attach derivative statements per elementary form. The
/// emitted functions are ordinary DSL code: they re-parse, re-resolve and
/// run in the same interpreter as their primals.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "adc/ast.hpp"

namespace adc {

struct TangentProgram {
  FunctionDef derived;  // <f>_darg<i>
  // original variable -> tangent variable for locals that carry one
  std::map<std::string, std::string> tangent_names;
};

/// Forward-accumulation transform, one independent parameter per pass.
///
/// - wrt a scalar `real` parameter: the derived function has f's exact
///   parameter list and returns the directional derivative with an implicit
///   unit seed.
/// - wrt a `real[]` parameter a: a caller-supplied seed array `_d_a` is
///   appended; the result is the directional derivative along that seed
///   (unit vectors recover single partials).
/// - f returns void (generated gradients, for second-order composition): a
///   tangent shadow array `_d_<a>` is appended for every array parameter, in
///   parameter order, and the derived function is void; tape intrinsics pass
///   tangents through alongside primal values.
TangentProgram differentiate_forward(const FunctionDef& f, const std::string& wrt);

struct ReverseOptions {
  // Pruning skips adjoint statements for variables that do not depend on the
  // wrt set. It must never change results, only op counts.
  bool prune_inactive = true;
};

struct AdjointProgram {
  FunctionDef derived;                    // <f>_grad... (void)
  std::vector<std::string> slot_params;   // appended slot names, request order
};

/// Reverse-accumulation transform: emits a void gradient function with
/// signature (original params..., one `real[]` adjoint slot per requested
/// parameter, in request order). Slots are accumulate-only (`+=`); the
/// caller owns initialization. The body is a forward sweep that records
/// overwritten values with `__push` and control outcomes with `__push_ctl`,
/// followed by the adjoint statements in exact reverse order.
AdjointProgram differentiate_gradient(const FunctionDef& f, const std::vector<std::string>& wrt,
                                      const ReverseOptions& opts = {});

/// Name of the emitted gradient: `<f>_grad_<i...>` with sorted parameter
/// indices, plain `<f>_grad` when wrt covers every differentiable parameter.
std::string gradient_name(const FunctionDef& f, const std::vector<std::string>& wrt);

/// Rewrites a resolved function body into elementary statement form.
/// Exposed for tests; both transforms call it internally.
FunctionDef linearize_for_ad(const FunctionDef& f, const std::vector<std::string>& wrt);

/// Moves early returns into branch tails so the body ends in exactly one
/// trailing return. Requires the usual one-return-per-path well-formedness.
FunctionDef normalize_returns(const FunctionDef& f);

}  // namespace adc
