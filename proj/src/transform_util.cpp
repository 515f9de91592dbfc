#include "transform_util.hpp"

namespace adc::detail {

void collect_names(const Block& b, std::set<std::string>& out) {
  for (const auto& s : b) {
    if (s->kind == StmtKind::VarDecl) out.insert(s->target);
    if (s->kind == StmtKind::For) out.insert(s->loop_var);
    collect_names(s->then_block, out);
    collect_names(s->else_block, out);
  }
}

NameGen::NameGen(const FunctionDef& f) {
  for (const auto& p : f.params) used_.insert(p.name);
  collect_names(f.body, used_);
}

std::string NameGen::fresh(const std::string& prefix) {
  int& n = counters_[prefix];
  while (true) {
    std::string candidate = prefix + std::to_string(n++);
    if (used_.insert(candidate).second) return candidate;
  }
}

std::string NameGen::claim(const std::string& want) {
  if (used_.insert(want).second) return want;
  for (int i = 2;; ++i) {
    std::string candidate = want + "_" + std::to_string(i);
    if (used_.insert(candidate).second) return candidate;
  }
}

bool is_atom(const Expr& e) {
  return e.kind == ExprKind::Constant || e.kind == ExprKind::VarRef || e.kind == ExprKind::Index;
}

bool reads_active(const Expr& e, const ActivitySet& act) {
  switch (e.kind) {
    case ExprKind::Constant: return false;
    case ExprKind::VarRef:
    case ExprKind::Index: return act.count(e.name) > 0;
    case ExprKind::Call:
      if (e.intr == Intrinsic::Pop) return true;
      if (e.intr == Intrinsic::PopCtl) return false;
      break;
    default: break;
  }
  for (const auto& a : e.args)
    if (reads_active(*a, act)) return true;
  return false;
}

ExprPtr clone_with_subst(const Expr& e, const std::map<std::string, std::string>& subst) {
  ExprPtr out = clone(e);
  struct Walker {
    const std::map<std::string, std::string>& subst;
    void walk(Expr& x) {
      if (x.kind == ExprKind::VarRef) {
        auto it = subst.find(x.name);
        if (it != subst.end()) x.name = it->second;
      }
      for (auto& a : x.args) walk(*a);
    }
  } w{subst};
  if (!subst.empty()) w.walk(*out);
  return out;
}

ExprPtr z_add(ExprPtr a, ExprPtr b, SourcePos pos) {
  if (!a) return b;
  if (!b) return a;
  return make_bin(BinOp::Add, std::move(a), std::move(b), pos);
}

ExprPtr z_sub(ExprPtr a, ExprPtr b, SourcePos pos) {
  if (!b) return a;
  if (!a) return z_neg(std::move(b), pos);
  return make_bin(BinOp::Sub, std::move(a), std::move(b), pos);
}

ExprPtr z_mul(ExprPtr a, ExprPtr b, SourcePos pos) {
  if (!a || !b) return nullptr;
  // Multiplying by a unit seed is common enough to fold away.
  if (a->kind == ExprKind::Constant && a->value == 1.0 && !a->pi) return b;
  if (b->kind == ExprKind::Constant && b->value == 1.0 && !b->pi) return a;
  return make_bin(BinOp::Mul, std::move(a), std::move(b), pos);
}

ExprPtr z_neg(ExprPtr a, SourcePos pos) {
  if (!a) return nullptr;
  // Negated literals fold so the printed form re-parses to the same node.
  if (a->kind == ExprKind::Constant && !a->pi) {
    a->value = -a->value;
    return a;
  }
  return make_neg(std::move(a), pos);
}

}  // namespace adc::detail
