// Internal helpers shared by the forward- and reverse-mode generators.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "adc/ast.hpp"
#include "adc/diag.hpp"
#include "adc/sema.hpp"

namespace adc::detail {

[[noreturn]] inline void transform_error(std::string msg, SourcePos pos = {}) {
  throw Error(ErrorKind::Transform, std::move(msg), pos);
}

/// Fresh-name source seeded with every identifier already used in a function.
class NameGen {
 public:
  explicit NameGen(const FunctionDef& f);

  std::string fresh(const std::string& prefix);
  /// Returns `want` if unused, otherwise `want_2`, `want_3`, ...
  std::string claim(const std::string& want);
  bool used(const std::string& name) const { return used_.count(name) > 0; }

 private:
  std::set<std::string> used_;
  std::map<std::string, int> counters_;
};

void collect_names(const Block& b, std::set<std::string>& out);

bool is_atom(const Expr& e);

/// True if evaluating e reads any variable in `act`.
bool reads_active(const Expr& e, const ActivitySet& act);

ExprPtr clone_with_subst(const Expr& e, const std::map<std::string, std::string>& subst);

/// Zero-aware expression builders (nullptr encodes a structural zero).
ExprPtr z_add(ExprPtr a, ExprPtr b, SourcePos pos = {});
ExprPtr z_sub(ExprPtr a, ExprPtr b, SourcePos pos = {});
ExprPtr z_mul(ExprPtr a, ExprPtr b, SourcePos pos = {});  // nullptr if either is zero
ExprPtr z_neg(ExprPtr a, SourcePos pos = {});

}  // namespace adc::detail
