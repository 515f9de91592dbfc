#include "adc/sema.hpp"

#include <functional>

#include "adc/diag.hpp"

namespace adc {

namespace {

[[noreturn]] void sema_error(SourcePos pos, std::string msg) {
  throw Error(ErrorKind::Semantic, "line " + std::to_string(pos.line) + ", column " +
                                       std::to_string(pos.column) + ": " + std::move(msg),
              pos);
}

enum class ExprType { Real, Integer, Bool, Array };

class Checker {
 public:
  explicit Checker(const FunctionDef& f) : f_(f) {}

  SymbolTable run() {
    if (f_.qualifiers.global) {
      if (f_.qualifiers.device || f_.qualifiers.host)
        sema_error(f_.pos, "'global' cannot be combined with other qualifiers");
      if (!f_.returns_void) sema_error(f_.pos, "kernel '" + f_.name + "' must return void");
    }
    for (size_t i = 0; i < f_.params.size(); ++i) {
      const Param& p = f_.params[i];
      declare(p.name, {SymbolKind::Param, p.type, p.pos, static_cast<int>(i)});
    }
    check_block(f_.body, /*in_loop=*/false);
    if (!f_.returns_void) {
      if (!block_definitely_returns(f_.body))
        sema_error(f_.pos, "function '" + f_.name + "' does not return on every path");
    }
    return table_;
  }

 private:
  void declare(const std::string& name, Symbol sym) {
    auto [it, inserted] = table_.symbols.emplace(name, sym);
    if (!inserted)
      sema_error(sym.pos, "duplicate declaration of '" + name + "' (first declared at line " +
                              std::to_string(it->second.pos.line) + ")");
  }

  const Symbol& lookup(const std::string& name, SourcePos pos) {
    if (f_.qualifiers.global && is_kernel_builtin(name)) {
      auto it = table_.symbols.find(name);
      if (it == table_.symbols.end()) {
        Symbol b{SymbolKind::Builtin, ValType::Integer, pos, -1};
        it = table_.symbols.emplace(name, b).first;
      }
      return it->second;
    }
    auto it = table_.symbols.find(name);
    if (it == table_.symbols.end()) sema_error(pos, "undefined variable '" + name + "'");
    return it->second;
  }

  ExprType check_expr(const Expr& e, bool condition_position = false) {
    switch (e.kind) {
      case ExprKind::Constant:
        return e.int_lit ? ExprType::Integer : ExprType::Real;
      case ExprKind::VarRef: {
        const Symbol& s = lookup(e.name, e.pos);
        if (s.type == ValType::RealArray)
          sema_error(e.pos, "array '" + e.name + "' must be indexed or passed whole as a call argument");
        return s.type == ValType::Integer ? ExprType::Integer : ExprType::Real;
      }
      case ExprKind::Neg: {
        ExprType t = check_expr(*e.args[0]);
        if (t == ExprType::Bool) sema_error(e.pos, "cannot negate a comparison");
        return t;
      }
      case ExprKind::Binary: {
        ExprType a = check_expr(*e.args[0]);
        ExprType b = check_expr(*e.args[1]);
        if (a == ExprType::Bool || b == ExprType::Bool)
          sema_error(e.pos, "comparisons cannot appear inside arithmetic");
        // Division always produces a real value; there is no integer division.
        if (e.op == BinOp::Div) return ExprType::Real;
        return (a == ExprType::Integer && b == ExprType::Integer) ? ExprType::Integer
                                                                  : ExprType::Real;
      }
      case ExprKind::Compare: {
        if (!condition_position)
          sema_error(e.pos, "comparisons are only allowed as branch conditions");
        ExprType a = check_expr(*e.args[0]);
        ExprType b = check_expr(*e.args[1]);
        if (a == ExprType::Bool || b == ExprType::Bool)
          sema_error(e.pos, "comparisons cannot be nested");
        return ExprType::Bool;
      }
      case ExprKind::Call: {
        if (e.intr == Intrinsic::Pop) return ExprType::Real;
        if (e.intr == Intrinsic::PopCtl) return ExprType::Integer;
        for (const auto& a : e.args) {
          ExprType t = check_expr(*a);
          if (t == ExprType::Bool) sema_error(e.pos, "comparison passed to intrinsic");
        }
        return ExprType::Real;
      }
      case ExprKind::Index: {
        const Symbol& s = lookup(e.name, e.pos);
        if (s.type != ValType::RealArray)
          sema_error(e.pos, "'" + e.name + "' is not an array");
        ExprType idx = check_expr(*e.args[0]);
        if (idx != ExprType::Integer)
          sema_error(e.args[0]->pos, "array index must be an integer expression");
        return ExprType::Real;
      }
    }
    return ExprType::Real;
  }

  void check_block(const Block& b, bool in_loop) {
    bool returned = false;
    for (const auto& s : b) {
      if (returned) sema_error(s->pos, "unreachable statement after return");
      check_stmt(*s, in_loop);
      if (s->kind == StmtKind::Return ||
          (s->kind == StmtKind::If && !s->else_block.empty() &&
           block_definitely_returns(s->then_block) && block_definitely_returns(s->else_block)))
        returned = true;
    }
  }

  void check_stmt(const Stmt& s, bool in_loop) {
    switch (s.kind) {
      case StmtKind::VarDecl: {
        ExprType init = check_expr(*s.expr);
        if (init == ExprType::Bool) sema_error(s.pos, "cannot store a comparison");
        if (s.decl_type == ValType::Integer && init != ExprType::Integer)
          sema_error(s.pos, "integer variable '" + s.target + "' initialized with a real value");
        declare(s.target, {SymbolKind::Local, s.decl_type, s.pos, -1});
        break;
      }
      case StmtKind::Assign: {
        const Symbol& sym = lookup(s.target, s.pos);
        if (sym.kind == SymbolKind::LoopVar)
          sema_error(s.pos, "loop variable '" + s.target + "' cannot be reassigned");
        if (sym.kind == SymbolKind::Builtin)
          sema_error(s.pos, "built-in '" + s.target + "' cannot be assigned");
        ExprType rhs = check_expr(*s.expr);
        if (rhs == ExprType::Bool) sema_error(s.pos, "cannot store a comparison");
        if (s.target_indexed) {
          if (sym.type != ValType::RealArray)
            sema_error(s.pos, "'" + s.target + "' is not an array");
          if (check_expr(*s.index) != ExprType::Integer)
            sema_error(s.index->pos, "array index must be an integer expression");
        } else {
          if (sym.type == ValType::RealArray)
            sema_error(s.pos, "whole-array assignment is not supported");
          if (sym.type == ValType::Integer && rhs != ExprType::Integer)
            sema_error(s.pos, "integer variable '" + s.target + "' assigned a real value");
        }
        break;
      }
      case StmtKind::Return: {
        if (f_.returns_void)
          sema_error(s.pos, f_.qualifiers.global ? "kernels do not return a value"
                                                 : "void function cannot return a value");
        if (in_loop) sema_error(s.pos, "return inside a for loop is not supported");
        ExprType t = check_expr(*s.expr);
        if (t == ExprType::Bool) sema_error(s.pos, "cannot return a comparison");
        break;
      }
      case StmtKind::If: {
        ExprType c = check_expr(*s.expr, /*condition_position=*/true);
        if (c != ExprType::Bool) sema_error(s.expr->pos, "branch condition must be a comparison");
        check_block(s.then_block, in_loop);
        check_block(s.else_block, in_loop);
        break;
      }
      case StmtKind::For: {
        if (check_expr(*s.lo) != ExprType::Integer)
          sema_error(s.lo->pos, "loop lower bound must be an integer expression");
        if (check_expr(*s.hi) != ExprType::Integer)
          sema_error(s.hi->pos, "loop upper bound must be an integer expression");
        declare(s.loop_var, {SymbolKind::LoopVar, ValType::Integer, s.pos, -1});
        check_block(s.then_block, /*in_loop=*/true);
        break;
      }
      case StmtKind::CallStmt: {
        if (s.callee == kPushName) {
          if (s.call_args.size() != 1 || check_expr(*s.call_args[0]) == ExprType::Bool)
            sema_error(s.pos, "__push takes one value argument");
          break;
        }
        if (s.callee == kPushCtlName) {
          if (s.call_args.size() != 1 || check_expr(*s.call_args[0]) != ExprType::Integer)
            sema_error(s.pos, "__push_ctl takes one integer argument");
          break;
        }
        // Shape of user-function call arguments is checked at module level
        // where the callee signature is known; here only resolve names.
        for (const auto& a : s.call_args) {
          if (a->kind == ExprKind::VarRef) {
            lookup(a->name, a->pos);  // bare array or scalar, both legal here
          } else {
            check_expr(*a);
          }
        }
        break;
      }
    }
  }

  const FunctionDef& f_;
  SymbolTable table_;
};

}  // namespace

const Symbol* SymbolTable::find(const std::string& name) const {
  auto it = symbols.find(name);
  return it == symbols.end() ? nullptr : &it->second;
}

bool block_definitely_returns(const Block& b) {
  for (const auto& s : b) {
    if (s->kind == StmtKind::Return) return true;
    if (s->kind == StmtKind::If && !s->else_block.empty() &&
        block_definitely_returns(s->then_block) && block_definitely_returns(s->else_block))
      return true;
  }
  return false;
}

SymbolTable resolve(const FunctionDef& f) { return Checker(f).run(); }

QualSet propagate_qualifiers(const FunctionDef& f) {
  if (f.qualifiers.global)
    throw Error(ErrorKind::Transform,
                "kernel '" + f.name + "' cannot be differentiated; differentiate the device "
                "functions it calls instead",
                f.pos);
  return f.qualifiers;
}

namespace {

bool expr_reads_active(const Expr& e, const ActivitySet& act) {
  switch (e.kind) {
    case ExprKind::Constant: return false;
    case ExprKind::VarRef: return act.count(e.name) > 0;
    case ExprKind::Index:
      // Index expressions are integer-valued and never active themselves.
      return act.count(e.name) > 0;
    case ExprKind::Call:
      if (e.intr == Intrinsic::Pop) return true;  // tape contents are opaque
      if (e.intr == Intrinsic::PopCtl) return false;
      [[fallthrough]];
    default:
      for (const auto& a : e.args)
        if (expr_reads_active(*a, act)) return true;
      return false;
  }
}

bool is_integer_symbol(const FunctionDef& f, const SymbolTable& table, const std::string& name) {
  const Symbol* s = table.find(name);
  (void)f;
  return s != nullptr && s->type == ValType::Integer;
}

void activity_pass(const Block& b, const SymbolTable& table, const FunctionDef& f,
                   ActivitySet& act, bool& changed) {
  for (const auto& s : b) {
    switch (s->kind) {
      case StmtKind::VarDecl:
      case StmtKind::Assign: {
        if (is_integer_symbol(f, table, s->target)) break;
        if (expr_reads_active(*s->expr, act) && act.insert(s->target).second) changed = true;
        break;
      }
      case StmtKind::If:
        activity_pass(s->then_block, table, f, act, changed);
        activity_pass(s->else_block, table, f, act, changed);
        break;
      case StmtKind::For:
        activity_pass(s->then_block, table, f, act, changed);
        break;
      default:
        break;
    }
  }
}

}  // namespace

ActivitySet activity(const FunctionDef& f, const std::vector<std::string>& wrt) {
  SymbolTable table = resolve(f);
  ActivitySet act;
  for (const auto& name : wrt) {
    const Symbol* s = table.find(name);
    if (s == nullptr || s->kind != SymbolKind::Param)
      throw Error(ErrorKind::Semantic,
                  "'" + name + "' is not a parameter of '" + f.name + "'", f.pos);
    if (s->type == ValType::Integer)
      throw Error(ErrorKind::Semantic,
                  "cannot differentiate with respect to integer parameter '" + name + "'", f.pos);
    act.insert(name);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    activity_pass(f.body, table, f, act, changed);
  }
  return act;
}

namespace {

void collect_calls(const Block& b, std::vector<const Stmt*>& out) {
  for (const auto& s : b) {
    if (s->kind == StmtKind::CallStmt && s->callee != kPushName && s->callee != kPushCtlName)
      out.push_back(s.get());
    collect_calls(s->then_block, out);
    collect_calls(s->else_block, out);
  }
}

}  // namespace

void check_module(const Module& m) {
  std::map<std::string, const FunctionDef*> by_name;
  for (const auto& f : m.functions) {
    auto [it, inserted] = by_name.emplace(f.name, &f);
    if (!inserted)
      throw Error(ErrorKind::Semantic, "duplicate function '" + f.name + "'", f.pos);
  }
  for (const auto& f : m.functions) {
    SymbolTable table = resolve(f);
    std::vector<const Stmt*> calls;
    collect_calls(f.body, calls);
    for (const Stmt* c : calls) {
      auto it = by_name.find(c->callee);
      if (it == by_name.end())
        sema_error(c->pos, "call to unknown function '" + c->callee + "'");
      const FunctionDef& callee = *it->second;
      if (callee.qualifiers.global)
        sema_error(c->pos, "kernel '" + callee.name + "' cannot be called; launch it instead");
      if (!callee.returns_void)
        sema_error(c->pos, "value returned by '" + callee.name + "' cannot be discarded");
      if ((f.qualifiers.global || f.qualifiers.device) && !callee.qualifiers.device)
        sema_error(c->pos, "'" + callee.name + "' is not device-qualified and cannot be called "
                           "from device code");
      if (c->call_args.size() != callee.params.size())
        sema_error(c->pos, "'" + callee.name + "' expects " +
                               std::to_string(callee.params.size()) + " arguments, got " +
                               std::to_string(c->call_args.size()));
      for (size_t i = 0; i < c->call_args.size(); ++i) {
        const Expr& a = *c->call_args[i];
        const Param& p = callee.params[i];
        bool arg_is_array = a.kind == ExprKind::VarRef && table.find(a.name) != nullptr &&
                            table.find(a.name)->type == ValType::RealArray;
        if (p.type == ValType::RealArray) {
          bool slice = a.kind == ExprKind::Index;
          if (!arg_is_array && !slice)
            sema_error(a.pos, "argument " + std::to_string(i + 1) + " of '" + callee.name +
                                  "' must be an array or an indexed slice");
        } else if (arg_is_array) {
          sema_error(a.pos, "array passed where scalar '" + p.name + "' is expected");
        }
      }
    }
  }
}

}  // namespace adc
