#include "adc/ast.hpp"

#include <algorithm>
#include <cmath>

namespace adc {

const char* intrinsic_name(Intrinsic i) {
  switch (i) {
    case Intrinsic::Sin: return "sin";
    case Intrinsic::Cos: return "cos";
    case Intrinsic::Tan: return "tan";
    case Intrinsic::Exp: return "exp";
    case Intrinsic::Log: return "log";
    case Intrinsic::Sqrt: return "sqrt";
    case Intrinsic::Pow: return "pow";
    case Intrinsic::Fabs: return "fabs";
    case Intrinsic::Pop: return "__pop";
    case Intrinsic::PopCtl: return "__pop_ctl";
  }
  return "?";
}

bool lookup_intrinsic(const std::string& name, Intrinsic& out) {
  static const std::pair<const char*, Intrinsic> table[] = {
      {"sin", Intrinsic::Sin},   {"cos", Intrinsic::Cos},   {"tan", Intrinsic::Tan},
      {"exp", Intrinsic::Exp},   {"log", Intrinsic::Log},   {"sqrt", Intrinsic::Sqrt},
      {"pow", Intrinsic::Pow},   {"fabs", Intrinsic::Fabs}, {"__pop", Intrinsic::Pop},
      {"__pop_ctl", Intrinsic::PopCtl},
  };
  for (const auto& [n, i] : table) {
    if (name == n) {
      out = i;
      return true;
    }
  }
  return false;
}

int intrinsic_arity(Intrinsic i) {
  switch (i) {
    case Intrinsic::Pow: return 2;
    case Intrinsic::Pop:
    case Intrinsic::PopCtl: return 0;
    default: return 1;
  }
}

const char* type_name(ValType t) {
  switch (t) {
    case ValType::Real: return "real";
    case ValType::RealArray: return "real[]";
    case ValType::Integer: return "integer";
  }
  return "?";
}

ExprPtr clone(const Expr& e) {
  auto out = std::make_unique<Expr>();
  out->kind = e.kind;
  out->pos = e.pos;
  out->value = e.value;
  out->int_lit = e.int_lit;
  out->pi = e.pi;
  out->name = e.name;
  out->op = e.op;
  out->cmp = e.cmp;
  out->intr = e.intr;
  out->args.reserve(e.args.size());
  for (const auto& a : e.args) out->args.push_back(clone(*a));
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::Constant:
      // Bit-for-bit value identity plus print hints.
      if (!(a.value == b.value || (std::isnan(a.value) && std::isnan(b.value)))) return false;
      if (a.int_lit != b.int_lit || a.pi != b.pi) return false;
      break;
    case ExprKind::VarRef:
      if (a.name != b.name) return false;
      break;
    case ExprKind::Neg:
      break;
    case ExprKind::Binary:
      if (a.op != b.op) return false;
      break;
    case ExprKind::Compare:
      if (a.cmp != b.cmp) return false;
      break;
    case ExprKind::Call:
      if (a.intr != b.intr) return false;
      break;
    case ExprKind::Index:
      if (a.name != b.name) return false;
      break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

ExprPtr make_const(double v, bool int_lit, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Constant;
  e->value = v;
  e->int_lit = int_lit;
  e->pos = pos;
  return e;
}

ExprPtr make_int_const(long long v, SourcePos pos) {
  return make_const(static_cast<double>(v), true, pos);
}

ExprPtr make_pi(SourcePos pos) {
  auto e = make_const(3.14159265358979323846, false, pos);
  e->pi = true;
  return e;
}

ExprPtr make_var(std::string name, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::VarRef;
  e->name = std::move(name);
  e->pos = pos;
  return e;
}

ExprPtr make_neg(ExprPtr inner, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Neg;
  e->pos = pos;
  e->args.push_back(std::move(inner));
  return e;
}

ExprPtr make_bin(BinOp op, ExprPtr a, ExprPtr b, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Binary;
  e->op = op;
  e->pos = pos;
  e->args.push_back(std::move(a));
  e->args.push_back(std::move(b));
  return e;
}

ExprPtr make_cmp(CmpOp op, ExprPtr a, ExprPtr b, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Compare;
  e->cmp = op;
  e->pos = pos;
  e->args.push_back(std::move(a));
  e->args.push_back(std::move(b));
  return e;
}

ExprPtr make_call(Intrinsic intr, std::vector<ExprPtr> args, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Call;
  e->intr = intr;
  e->pos = pos;
  e->args = std::move(args);
  return e;
}

ExprPtr make_index(std::string name, ExprPtr idx, SourcePos pos) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Index;
  e->name = std::move(name);
  e->pos = pos;
  e->args.push_back(std::move(idx));
  return e;
}

StmtPtr clone(const Stmt& s) {
  auto out = std::make_unique<Stmt>();
  out->kind = s.kind;
  out->pos = s.pos;
  out->decl_type = s.decl_type;
  out->target = s.target;
  out->target_indexed = s.target_indexed;
  out->compound_add = s.compound_add;
  if (s.index) out->index = clone(*s.index);
  if (s.expr) out->expr = clone(*s.expr);
  out->then_block = clone(s.then_block);
  out->else_block = clone(s.else_block);
  out->loop_var = s.loop_var;
  if (s.lo) out->lo = clone(*s.lo);
  if (s.hi) out->hi = clone(*s.hi);
  out->callee = s.callee;
  out->call_args.reserve(s.call_args.size());
  for (const auto& a : s.call_args) out->call_args.push_back(clone(*a));
  return out;
}

Block clone(const Block& b) {
  Block out;
  out.reserve(b.size());
  for (const auto& s : b) out.push_back(clone(*s));
  return out;
}

static bool opt_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a && !b) return true;
  if (!a || !b) return false;
  return structurally_equal(*a, *b);
}

bool structurally_equal(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind) return false;
  if (a.decl_type != b.decl_type || a.target != b.target ||
      a.target_indexed != b.target_indexed || a.compound_add != b.compound_add ||
      a.loop_var != b.loop_var || a.callee != b.callee)
    return false;
  if (!opt_equal(a.index, b.index) || !opt_equal(a.expr, b.expr) || !opt_equal(a.lo, b.lo) ||
      !opt_equal(a.hi, b.hi))
    return false;
  if (!structurally_equal(a.then_block, b.then_block)) return false;
  if (!structurally_equal(a.else_block, b.else_block)) return false;
  if (a.call_args.size() != b.call_args.size()) return false;
  for (size_t i = 0; i < a.call_args.size(); ++i)
    if (!structurally_equal(*a.call_args[i], *b.call_args[i])) return false;
  return true;
}

bool structurally_equal(const Block& a, const Block& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!structurally_equal(*a[i], *b[i])) return false;
  return true;
}

StmtPtr make_decl(ValType t, std::string name, ExprPtr init, SourcePos pos) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::VarDecl;
  s->decl_type = t;
  s->target = std::move(name);
  s->expr = std::move(init);
  s->pos = pos;
  return s;
}

StmtPtr make_assign(std::string name, ExprPtr rhs, bool compound, SourcePos pos) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::Assign;
  s->target = std::move(name);
  s->expr = std::move(rhs);
  s->compound_add = compound;
  s->pos = pos;
  return s;
}

StmtPtr make_assign_indexed(std::string name, ExprPtr idx, ExprPtr rhs, bool compound,
                            SourcePos pos) {
  auto s = make_assign(std::move(name), std::move(rhs), compound, pos);
  s->target_indexed = true;
  s->index = std::move(idx);
  return s;
}

StmtPtr make_return(ExprPtr e, SourcePos pos) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::Return;
  s->expr = std::move(e);
  s->pos = pos;
  return s;
}

StmtPtr make_if(ExprPtr cond, Block then_b, Block else_b, SourcePos pos) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::If;
  s->expr = std::move(cond);
  s->then_block = std::move(then_b);
  s->else_block = std::move(else_b);
  s->pos = pos;
  return s;
}

StmtPtr make_for(std::string var, ExprPtr lo, ExprPtr hi, Block body, SourcePos pos) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::For;
  s->loop_var = std::move(var);
  s->lo = std::move(lo);
  s->hi = std::move(hi);
  s->then_block = std::move(body);
  s->pos = pos;
  return s;
}

StmtPtr make_call_stmt(std::string callee, std::vector<ExprPtr> args, SourcePos pos) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::CallStmt;
  s->callee = std::move(callee);
  s->call_args = std::move(args);
  s->pos = pos;
  return s;
}

std::string qualifiers_to_string(const QualSet& q) {
  std::string out;
  auto add = [&](const char* w) {
    if (!out.empty()) out += ' ';
    out += w;
  };
  if (q.device) add("device");
  if (q.host) add("host");
  if (q.global) add("global");
  return out;
}

int FunctionDef::param_index(const std::string& pname) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == pname) return static_cast<int>(i);
  return -1;
}

FunctionDef clone(const FunctionDef& f) {
  FunctionDef out;
  out.name = f.name;
  out.qualifiers = f.qualifiers;
  out.returns_void = f.returns_void;
  out.params = f.params;
  out.body = clone(f.body);
  out.pos = f.pos;
  return out;
}

bool structurally_equal(const FunctionDef& a, const FunctionDef& b) {
  if (a.name != b.name || !(a.qualifiers == b.qualifiers) || a.returns_void != b.returns_void)
    return false;
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].name != b.params[i].name || a.params[i].type != b.params[i].type) return false;
  return structurally_equal(a.body, b.body);
}

const FunctionDef* Module::find(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

Module clone(const Module& m) {
  Module out;
  out.functions.reserve(m.functions.size());
  for (const auto& f : m.functions) out.functions.push_back(clone(f));
  return out;
}

bool structurally_equal(const Module& a, const Module& b) {
  if (a.functions.size() != b.functions.size()) return false;
  for (size_t i = 0; i < a.functions.size(); ++i)
    if (!structurally_equal(a.functions[i], b.functions[i])) return false;
  return true;
}

bool is_kernel_builtin(const std::string& name) {
  return name == "blockIdx" || name == "blockDim" || name == "threadIdx" || name == "N";
}

}  // namespace adc
