#include <map>

#include "adc/sema.hpp"
#include "adc/transform.hpp"
#include "transform_util.hpp"

namespace adc {

using detail::clone_with_subst;
using detail::NameGen;
using detail::transform_error;
using detail::z_add;
using detail::z_mul;
using detail::z_neg;
using detail::z_sub;

namespace {

ExprPtr call1(Intrinsic intr, ExprPtr a, SourcePos pos) {
  std::vector<ExprPtr> args;
  args.push_back(std::move(a));
  return make_call(intr, std::move(args), pos);
}

ExprPtr call2(Intrinsic intr, ExprPtr a, ExprPtr b, SourcePos pos) {
  std::vector<ExprPtr> args;
  args.push_back(std::move(a));
  args.push_back(std::move(b));
  return make_call(intr, std::move(args), pos);
}

class ForwardEmitter {
 public:
  ForwardEmitter(const FunctionDef& lin, const ActivitySet& act, const std::string& wrt,
                 bool wrt_is_array)
      : f_(lin), act_(act), wrt_(wrt), wrt_is_array_(wrt_is_array), names_(lin) {}

  TangentProgram run(int wrt_index) {
    FunctionDef out;
    out.name = f_.name + "_darg" + std::to_string(wrt_index);
    out.qualifiers = f_.qualifiers;
    out.returns_void = f_.returns_void;
    out.params = f_.params;
    out.pos = f_.pos;

    // Tangent storage for array parameters: a caller-supplied seed for an
    // array wrt, and shadow arrays for every array parameter of a void
    // function (generated gradients differentiated for second order).
    for (const auto& p : f_.params) {
      if (p.type != ValType::RealArray) continue;
      bool needs_shadow = f_.returns_void || (wrt_is_array_ && p.name == wrt_);
      if (!needs_shadow) {
        if (act_.count(p.name) > 0)
          transform_error("array parameter '" + p.name +
                          "' becomes active but has no tangent storage; include it in wrt");
        continue;
      }
      std::string shadow = names_.claim("_d_" + p.name);
      array_shadow_[p.name] = shadow;
      out.params.push_back({shadow, ValType::RealArray, p.pos});
    }

    // Scalar parameters that are overwritten need a materialized tangent
    // variable; a pure-read scalar wrt keeps its implicit unit seed inline.
    Block prologue;
    for (const auto& p : f_.params) {
      if (p.type != ValType::Real) continue;
      bool is_wrt = !wrt_is_array_ && p.name == wrt_;
      if (act_.count(p.name) == 0) continue;
      if (is_wrt && !name_is_assigned(f_.body, p.name)) continue;  // inline seed
      std::string tname = names_.claim("_d_" + p.name);
      tangent_[p.name] = tname;
      prologue.push_back(
          make_decl(ValType::Real, tname, make_const(is_wrt ? 1.0 : 0.0, true), p.pos));
    }

    Block body = emit_block(f_.body);
    for (auto it = prologue.rbegin(); it != prologue.rend(); ++it)
      body.insert(body.begin(), std::move(*it));
    out.body = std::move(body);

    TangentProgram tp;
    tp.derived = std::move(out);
    tp.tangent_names = tangent_;
    return tp;
  }

 private:
  static bool name_is_assigned(const Block& b, const std::string& name) {
    for (const auto& s : b) {
      if (s->kind == StmtKind::Assign && !s->target_indexed && s->target == name) return true;
      if (name_is_assigned(s->then_block, name) || name_is_assigned(s->else_block, name))
        return true;
    }
    return false;
  }

  // Tangent of an atomic operand; nullptr encodes an exact zero.
  ExprPtr tan_atom(const Expr& a) {
    switch (a.kind) {
      case ExprKind::Constant: return nullptr;
      case ExprKind::VarRef: {
        auto it = tangent_.find(a.name);
        if (it != tangent_.end()) return make_var(it->second, a.pos);
        if (!wrt_is_array_ && a.name == wrt_) return make_const(1.0, true, a.pos);
        return nullptr;
      }
      case ExprKind::Index: {
        auto it = array_shadow_.find(a.name);
        if (it == array_shadow_.end()) return nullptr;
        return make_index(it->second, clone(*a.args[0]), a.pos);
      }
      default: transform_error("operand is not atomic after linearization", a.pos);
    }
  }

  // Tangent of an elementary right-hand side. fabs and __pop are handled at
  // the statement level and never reach here.
  ExprPtr tan_rhs(const Expr& e) {
    SourcePos pos = e.pos;
    switch (e.kind) {
      case ExprKind::Constant:
      case ExprKind::VarRef:
      case ExprKind::Index: return tan_atom(e);
      case ExprKind::Neg: return z_neg(tan_atom(*e.args[0]), pos);
      case ExprKind::Binary: {
        const Expr& a = *e.args[0];
        const Expr& b = *e.args[1];
        ExprPtr ta = tan_atom(a);
        ExprPtr tb = tan_atom(b);
        switch (e.op) {
          case BinOp::Add: return z_add(std::move(ta), std::move(tb), pos);
          case BinOp::Sub: return z_sub(std::move(ta), std::move(tb), pos);
          case BinOp::Mul:
            return z_add(z_mul(std::move(ta), clone(b), pos),
                         z_mul(clone(a), std::move(tb), pos), pos);
          case BinOp::Div: {
            if (!tb) {
              if (!ta) return nullptr;
              return make_bin(BinOp::Div, std::move(ta), clone(b), pos);
            }
            ExprPtr num = z_sub(z_mul(std::move(ta), clone(b), pos),
                                z_mul(clone(a), std::move(tb), pos), pos);
            ExprPtr den = make_bin(BinOp::Mul, clone(b), clone(b), pos);
            return make_bin(BinOp::Div, std::move(num), std::move(den), pos);
          }
        }
        return nullptr;
      }
      case ExprKind::Call: {
        const Expr& u = *e.args[0];
        ExprPtr tu = tan_atom(u);
        switch (e.intr) {
          case Intrinsic::Sin:
            return z_mul(call1(Intrinsic::Cos, clone(u), pos), std::move(tu), pos);
          case Intrinsic::Cos:
            return z_neg(z_mul(call1(Intrinsic::Sin, clone(u), pos), std::move(tu), pos), pos);
          case Intrinsic::Tan: {
            if (!tu) return nullptr;
            ExprPtr c2 = make_bin(BinOp::Mul, call1(Intrinsic::Cos, clone(u), pos),
                                  call1(Intrinsic::Cos, clone(u), pos), pos);
            return make_bin(BinOp::Div, std::move(tu), std::move(c2), pos);
          }
          case Intrinsic::Exp:
            return z_mul(call1(Intrinsic::Exp, clone(u), pos), std::move(tu), pos);
          case Intrinsic::Log:
            if (!tu) return nullptr;
            return make_bin(BinOp::Div, std::move(tu), clone(u), pos);
          case Intrinsic::Sqrt:
            if (!tu) return nullptr;
            return make_bin(BinOp::Div, std::move(tu),
                            make_bin(BinOp::Mul, make_const(2.0, true, pos),
                                     call1(Intrinsic::Sqrt, clone(u), pos), pos),
                            pos);
          case Intrinsic::Pow: {
            if (!tu) return nullptr;  // active exponents were rewritten via exp/log
            const Expr& c = *e.args[1];
            ExprPtr cm1 = c.kind == ExprKind::Constant
                              ? make_const(c.value - 1.0, c.int_lit, pos)
                              : make_bin(BinOp::Sub, clone(c), make_const(1.0, true, pos), pos);
            ExprPtr factor = make_bin(BinOp::Mul, clone(c),
                                      call2(Intrinsic::Pow, clone(u), std::move(cm1), pos), pos);
            return z_mul(std::move(factor), std::move(tu), pos);
          }
          default:
            transform_error("intrinsic cannot be differentiated here", pos);
        }
      }
      default: transform_error("unsupported expression form", pos);
    }
  }

  std::string tangent_for_local(const std::string& name) {
    auto it = tangent_.find(name);
    if (it != tangent_.end()) return it->second;
    std::string t = names_.claim("_d_" + name);
    tangent_.emplace(name, t);
    return t;
  }

  // Emits the sign-split tangent of `v = fabs(u)` / `a[i] = fabs(u)`; the
  // derivative at zero is defined as zero.
  void emit_fabs(const Stmt& s, Block& out, bool is_decl) {
    const Expr& u = *s.expr->args[0];
    ExprPtr tu = tan_atom(u);
    bool active = s.target_indexed ? array_shadow_.count(s.target) > 0
                                   : act_.count(s.target) > 0;

    // Stores `value` into the tangent of the target.
    auto store_tangent = [&](ExprPtr value, Block& dst) {
      if (s.target_indexed) {
        dst.push_back(make_assign_indexed(array_shadow_[s.target], clone(*s.index),
                                          std::move(value), false, s.pos));
      } else {
        dst.push_back(make_assign(tangent_for_local(s.target), std::move(value), false, s.pos));
      }
    };

    if (!active) {
      out.push_back(clone(s));
      return;
    }
    if (!tu) {
      // Inactive argument: tangent is exactly zero.
      if (is_decl && !s.target_indexed) {
        out.push_back(clone(s));
        out.push_back(make_decl(ValType::Real, tangent_for_local(s.target),
                                make_const(0.0, true, s.pos), s.pos));
      } else {
        store_tangent(make_const(0.0, true, s.pos), out);
        out.push_back(clone(s));
      }
      return;
    }
    std::string saved = names_.fresh("_ft");
    out.push_back(make_decl(ValType::Real, saved, std::move(tu), s.pos));
    if (is_decl && !s.target_indexed) {
      out.push_back(clone(s));
      out.push_back(make_decl(ValType::Real, tangent_for_local(s.target),
                              make_const(0.0, true, s.pos), s.pos));
    } else {
      store_tangent(make_const(0.0, true, s.pos), out);
    }
    Block pos_b, neg_b;
    store_tangent(make_var(saved, s.pos), pos_b);
    store_tangent(make_neg(make_var(saved, s.pos), s.pos), neg_b);
    out.push_back(make_if(make_cmp(CmpOp::Gt, clone(u), make_const(0.0, true, s.pos), s.pos),
                          std::move(pos_b), {}, s.pos));
    out.push_back(make_if(make_cmp(CmpOp::Lt, clone(u), make_const(0.0, true, s.pos), s.pos),
                          std::move(neg_b), {}, s.pos));
    if (!(is_decl && !s.target_indexed)) out.push_back(clone(s));
  }

  Block emit_block(const Block& b) {
    Block out;
    for (const auto& s : b) emit_stmt(*s, out);
    return out;
  }

  void emit_stmt(const Stmt& s, Block& out) {
    switch (s.kind) {
      case StmtKind::VarDecl: {
        if (s.decl_type != ValType::Real || act_.count(s.target) == 0) {
          out.push_back(clone(s));
          return;
        }
        const Expr& rhs = *s.expr;
        if (rhs.kind == ExprKind::Call && rhs.intr == Intrinsic::Pop) {
          // Tangent was pushed after the value, so it pops first.
          out.push_back(make_decl(ValType::Real, tangent_for_local(s.target),
                                  make_call(Intrinsic::Pop, {}, s.pos), s.pos));
          out.push_back(clone(s));
          return;
        }
        if (rhs.kind == ExprKind::Call && rhs.intr == Intrinsic::Fabs) {
          emit_fabs(s, out, /*is_decl=*/true);
          return;
        }
        ExprPtr t = tan_rhs(rhs);
        out.push_back(clone(s));
        out.push_back(make_decl(ValType::Real, tangent_for_local(s.target),
                                t ? std::move(t) : make_const(0.0, true, s.pos), s.pos));
        return;
      }
      case StmtKind::Assign: {
        bool is_int_target =
            !s.target_indexed && tangent_.count(s.target) == 0 && act_.count(s.target) == 0;
        if (s.target_indexed) {
          auto shadow = array_shadow_.find(s.target);
          if (shadow == array_shadow_.end()) {
            if (act_.count(s.target) > 0)
              transform_error("write to active array '" + s.target + "' without tangent storage",
                              s.pos);
            out.push_back(clone(s));
            return;
          }
          const Expr& rhs = *s.expr;
          if (rhs.kind == ExprKind::Call && rhs.intr == Intrinsic::Pop) {
            out.push_back(make_assign_indexed(shadow->second, clone(*s.index),
                                              make_call(Intrinsic::Pop, {}, s.pos), false, s.pos));
            out.push_back(clone(s));
            return;
          }
          if (rhs.kind == ExprKind::Call && rhs.intr == Intrinsic::Fabs && !s.compound_add) {
            emit_fabs(s, out, /*is_decl=*/false);
            return;
          }
          ExprPtr t = tan_rhs(rhs);
          out.push_back(make_assign_indexed(shadow->second, clone(*s.index),
                                            t ? std::move(t) : make_const(0.0, true, s.pos),
                                            s.compound_add, s.pos));
          out.push_back(clone(s));
          return;
        }
        if (is_int_target) {
          out.push_back(clone(s));  // integer bookkeeping or inactive scalar
          return;
        }
        const Expr& rhs = *s.expr;
        if (rhs.kind == ExprKind::Call && rhs.intr == Intrinsic::Pop) {
          out.push_back(
              make_assign(tangent_for_local(s.target), make_call(Intrinsic::Pop, {}, s.pos),
                          false, s.pos));
          out.push_back(clone(s));
          return;
        }
        if (rhs.kind == ExprKind::Call && rhs.intr == Intrinsic::Fabs && !s.compound_add) {
          emit_fabs(s, out, /*is_decl=*/false);
          return;
        }
        ExprPtr t = tan_rhs(rhs);
        out.push_back(make_assign(tangent_for_local(s.target),
                                  t ? std::move(t) : make_const(0.0, true, s.pos), s.compound_add,
                                  s.pos));
        out.push_back(clone(s));
        return;
      }
      case StmtKind::Return: {
        ExprPtr t = tan_atom(*s.expr);
        out.push_back(make_return(t ? std::move(t) : make_const(0.0, true, s.pos), s.pos));
        return;
      }
      case StmtKind::If: {
        Block then_b = emit_block(s.then_block);
        Block else_b = emit_block(s.else_block);
        out.push_back(make_if(clone(*s.expr), std::move(then_b), std::move(else_b), s.pos));
        return;
      }
      case StmtKind::For: {
        Block body = emit_block(s.then_block);
        out.push_back(make_for(s.loop_var, clone(*s.lo), clone(*s.hi), std::move(body), s.pos));
        return;
      }
      case StmtKind::CallStmt: {
        if (s.callee == kPushName) {
          out.push_back(clone(s));
          ExprPtr t = tan_atom(*s.call_args[0]);
          std::vector<ExprPtr> args;
          args.push_back(t ? std::move(t) : make_const(0.0, true, s.pos));
          out.push_back(make_call_stmt(kPushName, std::move(args), s.pos));
          return;
        }
        if (s.callee == kPushCtlName) {
          out.push_back(clone(s));
          return;
        }
        transform_error("functions containing user calls cannot be differentiated", s.pos);
      }
    }
  }

  const FunctionDef& f_;
  const ActivitySet& act_;
  std::string wrt_;
  bool wrt_is_array_;
  NameGen names_;
  std::map<std::string, std::string> tangent_;       // scalar -> tangent var
  std::map<std::string, std::string> array_shadow_;  // array -> tangent array
};

}  // namespace

TangentProgram differentiate_forward(const FunctionDef& f, const std::string& wrt) {
  propagate_qualifiers(f);  // rejects kernels
  resolve(f);
  int idx = f.param_index(wrt);
  if (idx < 0)
    transform_error("'" + wrt + "' is not a parameter of '" + f.name + "'", f.pos);
  const Param& p = f.params[idx];
  if (p.type == ValType::Integer)
    transform_error("cannot differentiate with respect to integer parameter '" + wrt + "'",
                    f.pos);
  FunctionDef lin = linearize_for_ad(f, {wrt});
  ActivitySet act = activity(lin, {wrt});
  ForwardEmitter emitter(lin, act, wrt, p.type == ValType::RealArray);
  return emitter.run(idx);
}

}  // namespace adc
