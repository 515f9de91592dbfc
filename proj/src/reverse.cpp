#include <map>

#include "adc/sema.hpp"
#include "adc/transform.hpp"
#include "transform_util.hpp"

namespace adc {

using detail::clone_with_subst;
using detail::NameGen;
using detail::transform_error;

namespace {

using Subst = std::map<std::string, std::string>;

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

StmtPtr push_stmt(ExprPtr v, SourcePos pos) {
  std::vector<ExprPtr> args;
  args.push_back(std::move(v));
  return make_call_stmt(kPushName, std::move(args), pos);
}

StmtPtr push_ctl_stmt(ExprPtr v, SourcePos pos) {
  std::vector<ExprPtr> args;
  args.push_back(std::move(v));
  return make_call_stmt(kPushCtlName, std::move(args), pos);
}

struct WriteStats {
  int writes = 0;       // assignments (incl. converted declarations)
  bool in_loop = false;
  bool pre_initialized = false;  // parameter or kept declaration
};

// Where the adjoint of a scalar lives.
struct AdjTarget {
  enum Kind { None, SlotScalar, SlotArray, Local } kind = None;
  std::string name;
};

class ReverseEmitter {
 public:
  ReverseEmitter(const FunctionDef& f, const FunctionDef& lin,
                 const std::vector<std::string>& wrt, const ReverseOptions& opts)
      : original_(f), lin_(lin), wrt_(wrt), opts_(opts), names_(lin) {}

  AdjointProgram run() {
    act_ = activity(lin_, wrt_);
    if (!opts_.prune_inactive) {
      // Treat every real scalar as active; arrays keep their true activity
      // (an inactive array has no adjoint storage to write into).
      for (const auto& p : lin_.params)
        if (p.type == ValType::Real) act_.insert(p.name);
      add_all_real_locals(lin_.body);
    }

    prepare_work_body();

    AdjointProgram ap;
    FunctionDef& g = ap.derived;
    g.name = gradient_name(original_, wrt_);
    g.qualifiers = propagate_qualifiers(original_);
    g.returns_void = true;
    g.params = lin_.params;
    g.pos = original_.pos;

    for (const auto& w : wrt_) {
      std::string slot = names_.claim("_d_" + w);
      slots_[w] = slot;
      g.params.push_back({slot, ValType::RealArray, original_.pos});
      ap.slot_params.push_back(slot);
    }
    for (const auto& w : wrt_) {
      int idx = lin_.param_index(w);
      bool is_array = lin_.params[idx].type == ValType::RealArray;
      if (is_array) {
        if (stats_[w].writes > 0)
          transform_error("assignment to differentiated array parameter '" + w +
                          "' is not supported");
        continue;
      }
      if (stats_[w].writes > 0) accumulators_[w] = names_.claim("_d_" + w + "_acc");
    }

    Block body;
    emit_adjoint_decls(body);
    for (const auto& [name, type] : hoisted_)
      body.push_back(make_decl(type, name, make_const(0.0, true), lin_.pos));
    fwd_block(work_, 0, body);
    emit_seed(body);
    rev_block(work_, {}, body);
    for (const auto& [p, acc] : accumulators_) {
      body.push_back(make_assign_indexed(slots_[p], make_const(0.0, true),
                                         make_var(acc, lin_.pos), true, lin_.pos));
    }
    g.body = std::move(body);
    return ap;
  }

 private:
  void add_all_real_locals(const Block& b) {
    for (const auto& s : b) {
      if (s->kind == StmtKind::VarDecl && s->decl_type == ValType::Real) act_.insert(s->target);
      add_all_real_locals(s->then_block);
      add_all_real_locals(s->else_block);
    }
  }

  // ---- preparation -------------------------------------------------------

  void prepare_work_body() {
    for (const auto& p : lin_.params) stats_[p.name].pre_initialized = true;
    work_ = convert_block(lin_.body, 0, false);
  }

  Block convert_block(const Block& b, int depth, bool in_loop) {
    Block out;
    for (const auto& s : b) {
      switch (s->kind) {
        case StmtKind::VarDecl: {
          decl_order_.emplace_back(s->target, s->decl_type);
          if (depth == 0) {
            stats_[s->target].pre_initialized = true;
            out.push_back(clone(*s));
          } else {
            hoisted_.emplace_back(s->target, s->decl_type);
            WriteStats& st = stats_[s->target];
            ++st.writes;
            st.in_loop = st.in_loop || in_loop;
            out.push_back(make_assign(s->target, clone(*s->expr), false, s->pos));
          }
          break;
        }
        case StmtKind::Assign: {
          if (!s->target_indexed) {
            // Integer reassignment in the primal has no sound reversal rule
            // here (historical index values would be lost).
            const Param* p = nullptr;
            for (const auto& pp : lin_.params)
              if (pp.name == s->target) p = &pp;
            bool is_int = (p != nullptr && p->type == ValType::Integer) || is_int_local(s->target);
            if (is_int)
              transform_error("reassignment of integer variable '" + s->target +
                                  "' is not supported in differentiated code",
                              s->pos);
          } else {
            if (act_.count(s->target) > 0 || slots_.count(s->target) > 0 ||
                std::find(wrt_.begin(), wrt_.end(), s->target) != wrt_.end())
              transform_error("assignment into array '" + s->target +
                                  "' carrying derivatives is not supported",
                              s->pos);
          }
          WriteStats& st = stats_[s->target];
          ++st.writes;
          st.in_loop = st.in_loop || in_loop;
          out.push_back(clone(*s));
          break;
        }
        case StmtKind::If: {
          StmtPtr c = clone(*s);
          c->then_block = convert_block(s->then_block, depth + 1, in_loop);
          c->else_block = convert_block(s->else_block, depth + 1, in_loop);
          out.push_back(std::move(c));
          break;
        }
        case StmtKind::For: {
          StmtPtr c = clone(*s);
          c->then_block = convert_block(s->then_block, depth + 1, true);
          LoopMeta meta{names_.fresh("_lo"), names_.fresh("_hi"), depth > 0 || in_loop};
          if (meta.hoist) {
            // Bound temps of nested loops live at function scope so the
            // reverse sweep can reconstruct iteration indices.
            hoisted_.emplace_back(meta.lo, ValType::Integer);
            hoisted_.emplace_back(meta.hi, ValType::Integer);
          }
          loop_meta_[c.get()] = std::move(meta);
          out.push_back(std::move(c));
          break;
        }
        case StmtKind::Return:
          out.push_back(clone(*s));
          break;
        case StmtKind::CallStmt:
          transform_error(
              s->callee == kPushName || s->callee == kPushCtlName
                  ? "tape intrinsics cannot appear in the input of reverse differentiation"
                  : "functions containing user calls cannot be differentiated",
              s->pos);
      }
    }
    return out;
  }

  bool is_int_local(const std::string& name) const {
    for (const auto& [n, t] : decl_order_)
      if (n == name) return t == ValType::Integer;
    return false;
  }

  bool pushed(const Stmt& s) const {
    if (s.kind == StmtKind::VarDecl) return false;
    if (s.target_indexed) return true;
    auto it = stats_.find(s.target);
    const WriteStats& st = it->second;
    return st.in_loop || st.writes > 1 || (st.pre_initialized && st.writes >= 1);
  }

  // ---- adjoint storage ---------------------------------------------------

  AdjTarget adj_of(const std::string& name) {
    auto acc = accumulators_.find(name);
    if (acc != accumulators_.end()) return {AdjTarget::Local, acc->second};
    auto slot = slots_.find(name);
    if (slot != slots_.end()) {
      int idx = lin_.param_index(name);
      bool is_array = idx >= 0 && lin_.params[idx].type == ValType::RealArray;
      return {is_array ? AdjTarget::SlotArray : AdjTarget::SlotScalar, slot->second};
    }
    if (act_.count(name) == 0) return {};
    auto it = adj_locals_.find(name);
    if (it != adj_locals_.end()) return {AdjTarget::Local, it->second};
    std::string local = names_.claim("_d_" + name);
    adj_locals_.emplace(name, local);
    return {AdjTarget::Local, local};
  }

  void emit_adjoint_decls(Block& out) {
    // Materialize adjoint locals in a deterministic order: parameters first,
    // then locals in declaration order.
    std::vector<std::string> order;
    for (const auto& p : lin_.params)
      if (p.type == ValType::Real && act_.count(p.name) > 0 && slots_.count(p.name) == 0)
        order.push_back(p.name);
    for (const auto& [n, t] : decl_order_)
      if (t == ValType::Real && act_.count(n) > 0) order.push_back(n);
    for (const auto& n : order) {
      AdjTarget at = adj_of(n);
      if (at.kind == AdjTarget::Local && !declared_.count(at.name)) {
        declared_.insert(at.name);
        out.push_back(make_decl(ValType::Real, at.name, make_const(0.0, true), lin_.pos));
      }
    }
    for (const auto& [p, acc] : accumulators_) {
      if (!declared_.count(acc)) {
        declared_.insert(acc);
        out.push_back(make_decl(ValType::Real, acc, make_const(0.0, true), lin_.pos));
      }
    }
  }

  ExprPtr adj_read(const AdjTarget& at, SourcePos pos) {
    if (at.kind == AdjTarget::SlotScalar)
      return make_index(at.name, make_const(0.0, true, pos), pos);
    return make_var(at.name, pos);
  }

  StmtPtr adj_store(const AdjTarget& at, ExprPtr value, bool accumulate, SourcePos pos) {
    if (at.kind == AdjTarget::SlotScalar)
      return make_assign_indexed(at.name, make_const(0.0, true, pos), std::move(value),
                                 accumulate, pos);
    return make_assign(at.name, std::move(value), accumulate, pos);
  }

  // _d_<u> += value for an atomic operand u (variable or array element).
  void incr(const Expr& atom, ExprPtr value, const Subst& subst, Block& out) {
    if (!value) return;
    SourcePos pos = atom.pos;
    if (atom.kind == ExprKind::Constant) return;
    if (atom.kind == ExprKind::VarRef) {
      AdjTarget at = adj_of(atom.name);
      if (at.kind == AdjTarget::None) return;
      out.push_back(adj_store(at, std::move(value), true, pos));
      return;
    }
    if (atom.kind == ExprKind::Index) {
      auto slot = slots_.find(atom.name);
      if (slot == slots_.end()) {
        if (act_.count(atom.name) > 0)
          transform_error("active array '" + atom.name + "' has no adjoint slot", pos);
        return;
      }
      out.push_back(make_assign_indexed(slot->second, clone_with_subst(*atom.args[0], subst),
                                        std::move(value), true, pos));
      return;
    }
    transform_error("operand is not atomic after linearization", pos);
  }

  bool operand_active(const Expr& atom) {
    if (atom.kind == ExprKind::Constant) return false;
    if (atom.kind == ExprKind::VarRef)
      return adj_of(atom.name).kind != AdjTarget::None;
    if (atom.kind == ExprKind::Index) return slots_.count(atom.name) > 0;
    return false;
  }

  bool rhs_reads_adjointed_operand(const Expr& rhs) {
    if (detail::is_atom(rhs)) return operand_active(rhs);
    for (const auto& a : rhs.args)
      if (operand_active(*a)) return true;
    return false;
  }

  // ---- forward sweep -----------------------------------------------------

  // Nested-loop bound temps were pre-hoisted during conversion; record the
  // old value on the control tape before overwriting.
  void emit_int_temp(const std::string& name, ExprPtr value, bool hoist, SourcePos pos,
                     Block& out) {
    if (!hoist) {
      out.push_back(make_decl(ValType::Integer, name, std::move(value), pos));
    } else {
      out.push_back(push_ctl_stmt(make_var(name, pos), pos));
      out.push_back(make_assign(name, std::move(value), false, pos));
    }
  }

  void fwd_block(const Block& b, int depth, Block& out) {
    for (const auto& s : b) fwd_stmt(*s, depth, out);
  }

  void fwd_stmt(const Stmt& s, int depth, Block& out) {
    switch (s.kind) {
      case StmtKind::VarDecl:
        out.push_back(clone(s));
        break;
      case StmtKind::Assign: {
        bool is_int = !s.target_indexed && is_int_target(s);
        if (pushed(s)) {
          if (s.target_indexed) {
            out.push_back(push_stmt(make_index(s.target, clone(*s.index), s.pos), s.pos));
          } else if (is_int) {
            out.push_back(push_ctl_stmt(make_var(s.target, s.pos), s.pos));
          } else {
            out.push_back(push_stmt(make_var(s.target, s.pos), s.pos));
          }
        }
        out.push_back(clone(s));
        break;
      }
      case StmtKind::Return:
        break;  // handled by the seed
      case StmtKind::If: {
        Block then_b, else_b;
        then_b.push_back(push_ctl_stmt(make_const(1.0, true, s.pos), s.pos));
        fwd_block(s.then_block, depth + 1, then_b);
        else_b.push_back(push_ctl_stmt(make_const(0.0, true, s.pos), s.pos));
        fwd_block(s.else_block, depth + 1, else_b);
        out.push_back(make_if(clone(*s.expr), std::move(then_b), std::move(else_b), s.pos));
        break;
      }
      case StmtKind::For: {
        const LoopMeta& meta = loop_meta_.at(&s);
        emit_int_temp(meta.lo, clone(*s.lo), meta.hoist, s.pos, out);
        emit_int_temp(meta.hi, clone(*s.hi), meta.hoist, s.pos, out);
        Block body;
        fwd_block(s.then_block, depth + 1, body);
        out.push_back(
            make_for(s.loop_var, make_var(meta.lo, s.pos), make_var(meta.hi, s.pos),
                     std::move(body), s.pos));
        out.push_back(push_ctl_stmt(
            make_bin(BinOp::Sub, make_var(meta.hi, s.pos), make_var(meta.lo, s.pos), s.pos),
            s.pos));
        break;
      }
      case StmtKind::CallStmt:
        break;  // rejected during preparation
    }
  }

  bool is_int_target(const Stmt& s) const {
    auto it = std::find_if(decl_order_.begin(), decl_order_.end(),
                           [&](const auto& d) { return d.first == s.target; });
    if (it != decl_order_.end()) return it->second == ValType::Integer;
    for (const auto& [n, t] : hoisted_)
      if (n == s.target) return t == ValType::Integer;
    int idx = lin_.param_index(s.target);
    return idx >= 0 && lin_.params[idx].type == ValType::Integer;
  }

  // ---- seed --------------------------------------------------------------

  void emit_seed(Block& out) {
    const Stmt* ret = nullptr;
    for (const auto& s : work_)
      if (s->kind == StmtKind::Return) ret = s.get();
    if (ret == nullptr) transform_error("missing return in normalized body", lin_.pos);
    incr(*ret->expr, make_const(1.0, true, ret->pos), {}, out);
  }

  // ---- reverse sweep -----------------------------------------------------

  void rev_block(const Block& b, const Subst& subst, Block& out) {
    for (auto it = b.rbegin(); it != b.rend(); ++it) rev_stmt(**it, subst, out);
  }

  void rev_stmt(const Stmt& s, const Subst& subst, Block& out) {
    switch (s.kind) {
      case StmtKind::VarDecl:
        rev_assign(s, /*was_pushed=*/false, subst, out);
        break;
      case StmtKind::Assign:
        rev_assign(s, pushed(s), subst, out);
        break;
      case StmtKind::Return:
        break;
      case StmtKind::If: {
        std::string c = names_.fresh("_c");
        out.push_back(make_decl(ValType::Integer, c, make_call(Intrinsic::PopCtl, {}, s.pos),
                                s.pos));
        Block then_b, else_b;
        rev_block(s.then_block, subst, then_b);
        rev_block(s.else_block, subst, else_b);
        out.push_back(make_if(
            make_cmp(CmpOp::Eq, make_var(c, s.pos), make_const(1.0, true, s.pos), s.pos),
            std::move(then_b), std::move(else_b), s.pos));
        break;
      }
      case StmtKind::For: {
        const LoopMeta& meta = loop_meta_.at(&s);
        std::string n = names_.fresh("_n");
        out.push_back(make_decl(ValType::Integer, n, make_call(Intrinsic::PopCtl, {}, s.pos),
                                s.pos));
        std::string j = names_.fresh("_j");
        Block body;
        Subst inner = subst;
        if (block_mentions(s.then_block, s.loop_var)) {
          std::string last = names_.fresh("_last");
          out.push_back(make_decl(
              ValType::Integer, last,
              make_bin(BinOp::Sub,
                       make_bin(BinOp::Add, make_var(meta.lo, s.pos), make_var(n, s.pos), s.pos),
                       make_const(1.0, true, s.pos), s.pos),
              s.pos));
          std::string i = names_.fresh("_i");
          body.push_back(make_decl(
              ValType::Integer, i,
              make_bin(BinOp::Sub, make_var(last, s.pos), make_var(j, s.pos), s.pos), s.pos));
          inner[s.loop_var] = i;
        }
        rev_block(s.then_block, inner, body);
        out.push_back(make_for(j, make_const(0.0, true, s.pos), make_var(n, s.pos),
                               std::move(body), s.pos));
        if (meta.hoist) {
          // Bound temps of a nested loop were recorded before being
          // overwritten; restore in reverse push order.
          out.push_back(
              make_assign(meta.hi, make_call(Intrinsic::PopCtl, {}, s.pos), false, s.pos));
          out.push_back(
              make_assign(meta.lo, make_call(Intrinsic::PopCtl, {}, s.pos), false, s.pos));
        }
        break;
      }
      case StmtKind::CallStmt:
        break;
    }
  }

  static bool block_mentions(const Block& b, const std::string& name) {
    struct {
      const std::string& name;
      bool found = false;
      void walk_expr(const Expr& e) {
        if (found) return;
        if ((e.kind == ExprKind::VarRef || e.kind == ExprKind::Index) && e.name == name)
          found = true;
        for (const auto& a : e.args) walk_expr(*a);
      }
      void walk(const Block& blk) {
        for (const auto& s : blk) {
          if (found) return;
          if (s->index) walk_expr(*s->index);
          if (s->expr) walk_expr(*s->expr);
          if (s->lo) walk_expr(*s->lo);
          if (s->hi) walk_expr(*s->hi);
          for (const auto& a : s->call_args) walk_expr(*a);
          walk(s->then_block);
          walk(s->else_block);
        }
      }
    } w{name};
    w.walk(b);
    return w.found;
  }

  void rev_assign(const Stmt& s, bool was_pushed, const Subst& subst, Block& out) {
    SourcePos pos = s.pos;
    if (s.target_indexed) {
      // Arrays carrying derivatives were rejected up front; only restore.
      if (was_pushed)
        out.push_back(make_assign_indexed(s.target, clone_with_subst(*s.index, subst),
                                          make_call(Intrinsic::Pop, {}, pos), false, pos));
      return;
    }
    if (is_int_target(s)) {
      if (was_pushed)
        out.push_back(make_assign(s.target, make_call(Intrinsic::PopCtl, {}, pos), false, pos));
      return;
    }
    AdjTarget at = adj_of(s.target);
    const Expr& rhs = *s.expr;
    if (at.kind == AdjTarget::None) {
      if (was_pushed)
        out.push_back(make_assign(s.target, make_call(Intrinsic::Pop, {}, pos), false, pos));
      return;
    }
    if (rhs.kind == ExprKind::Call && (rhs.intr == Intrinsic::Pop || rhs.intr == Intrinsic::PopCtl))
      transform_error("tape intrinsics cannot appear in the input of reverse differentiation",
                      pos);

    if (!rhs_reads_adjointed_operand(rhs)) {
      // Nothing to propagate into; consume the adjoint and restore the value.
      out.push_back(adj_store(at, make_const(0.0, true, pos), false, pos));
      if (was_pushed)
        out.push_back(make_assign(s.target, make_call(Intrinsic::Pop, {}, pos), false, pos));
      return;
    }

    std::string r = names_.fresh("_r");
    out.push_back(make_decl(ValType::Real, r, adj_read(at, pos), pos));
    out.push_back(adj_store(at, make_const(0.0, true, pos), false, pos));

    // Some partials reuse the just-assigned result (quotient, exp, sqrt);
    // capture it before the pop restores the previous value.
    std::string q;
    bool reuse = rhs.kind == ExprKind::Binary && rhs.op == BinOp::Div &&
                 operand_active(*rhs.args[1]);
    if (rhs.kind == ExprKind::Call &&
        (rhs.intr == Intrinsic::Exp || rhs.intr == Intrinsic::Sqrt) &&
        operand_active(*rhs.args[0]))
      reuse = true;
    if (reuse) {
      q = names_.fresh("_q");
      out.push_back(make_decl(ValType::Real, q, make_var(s.target, pos), pos));
    }
    if (was_pushed)
      out.push_back(make_assign(s.target, make_call(Intrinsic::Pop, {}, pos), false, pos));

    emit_increments(rhs, r, q, subst, out);
  }

  void emit_increments(const Expr& rhs, const std::string& r, const std::string& q,
                       const Subst& subst, Block& out) {
    SourcePos pos = rhs.pos;
    auto seed = [&] { return make_var(r, pos); };
    auto sub_clone = [&](const Expr& e) { return clone_with_subst(e, subst); };
    switch (rhs.kind) {
      case ExprKind::Constant:
        return;
      case ExprKind::VarRef:
      case ExprKind::Index:
        incr(rhs, seed(), subst, out);
        return;
      case ExprKind::Neg:
        incr(*rhs.args[0], make_neg(seed(), pos), subst, out);
        return;
      case ExprKind::Binary: {
        const Expr& a = *rhs.args[0];
        const Expr& b = *rhs.args[1];
        switch (rhs.op) {
          case BinOp::Add:
            incr(a, seed(), subst, out);
            incr(b, seed(), subst, out);
            return;
          case BinOp::Sub:
            incr(a, seed(), subst, out);
            incr(b, make_neg(seed(), pos), subst, out);
            return;
          case BinOp::Mul:
            if (operand_active(a))
              incr(a, make_bin(BinOp::Mul, seed(), sub_clone(b), pos), subst, out);
            if (operand_active(b))
              incr(b, make_bin(BinOp::Mul, sub_clone(a), seed(), pos), subst, out);
            return;
          case BinOp::Div:
            if (operand_active(a))
              incr(a, make_bin(BinOp::Div, seed(), sub_clone(b), pos), subst, out);
            if (operand_active(b)) {
              // d(a/b)/db = -(a/b)/b, reusing the captured quotient.
              ExprPtr v = make_neg(
                  make_bin(BinOp::Div, make_bin(BinOp::Mul, seed(), make_var(q, pos), pos),
                           sub_clone(b), pos),
                  pos);
              incr(b, std::move(v), subst, out);
            }
            return;
        }
        return;
      }
      case ExprKind::Call: {
        const Expr& u = *rhs.args[0];
        if (!operand_active(u)) {
          if (rhs.intr == Intrinsic::Pow && rhs.args.size() > 1 && operand_active(*rhs.args[1]))
            transform_error("active pow exponent should have been rewritten", pos);
          return;
        }
        switch (rhs.intr) {
          case Intrinsic::Sin:
            incr(u, make_bin(BinOp::Mul, seed(), call1(Intrinsic::Cos, sub_clone(u), pos), pos),
                 subst, out);
            return;
          case Intrinsic::Cos:
            incr(u,
                 make_neg(make_bin(BinOp::Mul, seed(),
                                   call1(Intrinsic::Sin, sub_clone(u), pos), pos),
                          pos),
                 subst, out);
            return;
          case Intrinsic::Tan: {
            std::string c = names_.fresh("_w");
            out.push_back(
                make_decl(ValType::Real, c, call1(Intrinsic::Cos, sub_clone(u), pos), pos));
            incr(u,
                 make_bin(BinOp::Div, seed(),
                          make_bin(BinOp::Mul, make_var(c, pos), make_var(c, pos), pos), pos),
                 subst, out);
            return;
          }
          case Intrinsic::Exp:
            incr(u, make_bin(BinOp::Mul, seed(), make_var(q, pos), pos), subst, out);
            return;
          case Intrinsic::Log:
            incr(u, make_bin(BinOp::Div, seed(), sub_clone(u), pos), subst, out);
            return;
          case Intrinsic::Sqrt:
            incr(u,
                 make_bin(BinOp::Div, seed(),
                          make_bin(BinOp::Mul, make_const(2.0, true, pos), make_var(q, pos), pos),
                          pos),
                 subst, out);
            return;
          case Intrinsic::Pow: {
            const Expr& c = *rhs.args[1];
            ExprPtr cm1 = c.kind == ExprKind::Constant
                              ? make_const(c.value - 1.0, c.int_lit, pos)
                              : make_bin(BinOp::Sub, sub_clone(c), make_const(1.0, true, pos),
                                         pos);
            ExprPtr factor =
                make_bin(BinOp::Mul, sub_clone(c),
                         call2(Intrinsic::Pow, sub_clone(u), std::move(cm1), pos), pos);
            incr(u, make_bin(BinOp::Mul, seed(), std::move(factor), pos), subst, out);
            return;
          }
          case Intrinsic::Fabs: {
            Block pos_b, neg_b;
            incr(u, seed(), subst, pos_b);
            incr(u, make_neg(seed(), pos), subst, neg_b);
            out.push_back(make_if(
                make_cmp(CmpOp::Gt, sub_clone(u), make_const(0.0, true, pos), pos),
                std::move(pos_b), {}, pos));
            out.push_back(make_if(
                make_cmp(CmpOp::Lt, sub_clone(u), make_const(0.0, true, pos), pos),
                std::move(neg_b), {}, pos));
            return;
          }
          default:
            transform_error("intrinsic cannot be reverse-differentiated", pos);
        }
      }
      default:
        transform_error("unsupported expression in reverse sweep", pos);
    }
  }

  struct LoopMeta {
    std::string lo;
    std::string hi;
    bool hoist = false;
  };

  const FunctionDef& original_;
  const FunctionDef& lin_;
  std::vector<std::string> wrt_;
  ReverseOptions opts_;
  NameGen names_;
  ActivitySet act_;
  Block work_;
  std::map<const Stmt*, LoopMeta> loop_meta_;
  std::map<std::string, WriteStats> stats_;
  std::vector<std::pair<std::string, ValType>> decl_order_;
  std::vector<std::pair<std::string, ValType>> hoisted_;
  std::map<std::string, std::string> slots_;         // wrt param -> slot param
  std::map<std::string, std::string> accumulators_;  // overwritten wrt -> local
  std::map<std::string, std::string> adj_locals_;    // scalar -> adjoint local
  std::set<std::string> declared_;
};

}  // namespace

AdjointProgram differentiate_gradient(const FunctionDef& f, const std::vector<std::string>& wrt,
                                      const ReverseOptions& opts) {
  propagate_qualifiers(f);  // rejects kernels
  if (f.returns_void)
    transform_error("'" + f.name + "' returns no value; only scalar functions have gradients",
                    f.pos);
  if (wrt.empty()) transform_error("empty wrt list", f.pos);
  resolve(f);
  for (const auto& w : wrt) {
    int idx = f.param_index(w);
    if (idx < 0) transform_error("'" + w + "' is not a parameter of '" + f.name + "'", f.pos);
    if (f.params[idx].type == ValType::Integer)
      transform_error("cannot differentiate with respect to integer parameter '" + w + "'",
                      f.pos);
  }
  for (size_t i = 0; i < wrt.size(); ++i)
    for (size_t j = i + 1; j < wrt.size(); ++j)
      if (wrt[i] == wrt[j]) transform_error("duplicate wrt parameter '" + wrt[i] + "'", f.pos);
  FunctionDef normalized = normalize_returns(f);
  FunctionDef lin = linearize_for_ad(normalized, wrt);
  ReverseEmitter emitter(f, lin, wrt, opts);
  return emitter.run();
}

}  // namespace adc
