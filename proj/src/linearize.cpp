#include <map>

#include "adc/printer.hpp"
#include "adc/transform.hpp"
#include "transform_util.hpp"

namespace adc {

using detail::is_atom;
using detail::NameGen;
using detail::reads_active;
using detail::transform_error;

namespace {

// ---------------------------------------------------------------------------
// Return normalization: pull trailing statements into the branches of any if
// that returns on some path, so that the only return left is the last
// statement of the body. Statement duplication into both branches is possible
// but bounded by nesting depth, which is small in practice.
// ---------------------------------------------------------------------------

bool contains_return(const Block& b) {
  for (const auto& s : b) {
    if (s->kind == StmtKind::Return) return true;
    if (contains_return(s->then_block) || contains_return(s->else_block)) return true;
  }
  return false;
}

Block normalize_block(Block in) {
  Block out;
  for (size_t i = 0; i < in.size(); ++i) {
    Stmt& s = *in[i];
    if (s.kind == StmtKind::If &&
        (contains_return(s.then_block) || contains_return(s.else_block))) {
      Block rest;
      for (size_t j = i + 1; j < in.size(); ++j) rest.push_back(std::move(in[j]));
      bool then_returns = block_definitely_returns(s.then_block);
      bool else_returns = block_definitely_returns(s.else_block);
      Block then_b = std::move(s.then_block);
      Block else_b = std::move(s.else_block);
      if (!then_returns)
        for (auto& r : clone(rest)) then_b.push_back(std::move(r));
      if (!else_returns)
        for (auto& r : std::move(rest)) else_b.push_back(std::move(r));
      out.push_back(make_if(std::move(s.expr), normalize_block(std::move(then_b)),
                            normalize_block(std::move(else_b)), s.pos));
      return out;
    }
    out.push_back(std::move(in[i]));
  }
  return out;
}

// Hoists a lone trailing `if { return A } else { return B }` into
// `real r; if { r = A } else { r = B }; return r` so each function ends with
// a single unconditional return.
Block flatten_trailing_if(Block b, NameGen& names) {
  if (b.empty()) return b;
  Stmt& last = *b.back();
  if (last.kind != StmtKind::If) return b;
  std::string ret = names.fresh("_ret");
  Block out;
  for (size_t i = 0; i + 1 < b.size(); ++i) out.push_back(std::move(b[i]));

  // Recursively rewrite `return X;` into `ret = X;` inside the branches.
  struct Rewriter {
    const std::string& ret;
    void rewrite(Block& blk) {
      for (auto& s : blk) {
        if (s->kind == StmtKind::Return) {
          s = make_assign(ret, std::move(s->expr), false, s->pos);
        } else {
          rewrite(s->then_block);
          rewrite(s->else_block);
        }
      }
    }
  } rw{ret};
  rw.rewrite(last.then_block);
  rw.rewrite(last.else_block);

  out.push_back(make_decl(ValType::Real, ret, make_const(0.0, true), last.pos));
  out.push_back(std::move(b.back()));
  out.push_back(make_return(make_var(ret, last.pos), last.pos));
  return out;
}

// ---------------------------------------------------------------------------
// Linearization into elementary statements.
// ---------------------------------------------------------------------------

class Linearizer {
 public:
  Linearizer(NameGen& names, const ActivitySet& act) : names_(names), act_(act) {}

  Block run(const Block& b) {
    Block out;
    for (const auto& s : b) lin_stmt(*s, out);
    return out;
  }

 private:
  void lin_stmt(const Stmt& s, Block& out) {
    switch (s.kind) {
      case StmtKind::VarDecl:
        if (s.decl_type == ValType::Real) {
          ExprPtr rhs = lin_rhs(*s.expr, out);
          out.push_back(make_decl(ValType::Real, s.target, std::move(rhs), s.pos));
        } else {
          out.push_back(clone(s));
        }
        break;
      case StmtKind::Assign: {
        if (!s.target_indexed) {
          // Integer state is left untouched by linearization.
          ExprPtr rhs_src = clone(*s.expr);
          if (s.compound_add)
            rhs_src = make_bin(BinOp::Add, make_var(s.target, s.pos), std::move(rhs_src), s.pos);
          memo_.clear();
          ExprPtr rhs = lin_rhs(*rhs_src, out);
          out.push_back(make_assign(s.target, std::move(rhs), false, s.pos));
        } else {
          ExprPtr rhs_src = clone(*s.expr);
          if (s.compound_add)
            rhs_src = make_bin(BinOp::Add, make_index(s.target, clone(*s.index), s.pos),
                               std::move(rhs_src), s.pos);
          memo_.clear();
          ExprPtr rhs = lin_rhs(*rhs_src, out);
          out.push_back(
              make_assign_indexed(s.target, clone(*s.index), std::move(rhs), false, s.pos));
        }
        break;
      }
      case StmtKind::Return: {
        memo_.clear();
        ExprPtr atom = atomize(*s.expr, out);
        out.push_back(make_return(std::move(atom), s.pos));
        break;
      }
      case StmtKind::If: {
        Block then_b = run(s.then_block);
        Block else_b = run(s.else_block);
        out.push_back(make_if(clone(*s.expr), std::move(then_b), std::move(else_b), s.pos));
        break;
      }
      case StmtKind::For: {
        Block body = run(s.then_block);
        out.push_back(make_for(s.loop_var, clone(*s.lo), clone(*s.hi), std::move(body), s.pos));
        break;
      }
      case StmtKind::CallStmt:
        out.push_back(clone(s));
        break;
    }
    memo_.clear();
  }

  // Produces an elementary right-hand side (at most one operation deep, all
  // operands atomic), emitting temporaries for nested subexpressions.
  ExprPtr lin_rhs(const Expr& e, Block& out) {
    switch (e.kind) {
      case ExprKind::Constant:
      case ExprKind::VarRef:
      case ExprKind::Index:
        return clone(e);
      case ExprKind::Neg:
        return make_neg(atomize(*e.args[0], out), e.pos);
      case ExprKind::Binary: {
        ExprPtr a = atomize(*e.args[0], out);  // sequence temp emission left to right
        ExprPtr b = atomize(*e.args[1], out);
        return make_bin(e.op, std::move(a), std::move(b), e.pos);
      }
      case ExprKind::Call: {
        if (e.intr == Intrinsic::Pop || e.intr == Intrinsic::PopCtl) return clone(e);
        if (e.intr == Intrinsic::Pow && reads_active(*e.args[1], act_)) {
          // Active exponent: pow(u, v) = exp(v * log(u)); requires u > 0 at
          // runtime, enforced by the interpreter's log domain check.
          ExprPtr u = atomize(*e.args[0], out);
          ExprPtr v = atomize(*e.args[1], out);
          std::string lg = names_.fresh("_t");
          std::vector<ExprPtr> log_args;
          log_args.push_back(std::move(u));
          out.push_back(make_decl(ValType::Real, lg,
                                  make_call(Intrinsic::Log, std::move(log_args), e.pos), e.pos));
          std::string pr = names_.fresh("_t");
          out.push_back(make_decl(
              ValType::Real, pr,
              make_bin(BinOp::Mul, std::move(v), make_var(lg, e.pos), e.pos), e.pos));
          std::vector<ExprPtr> exp_args;
          exp_args.push_back(make_var(pr, e.pos));
          return make_call(Intrinsic::Exp, std::move(exp_args), e.pos);
        }
        std::vector<ExprPtr> args;
        for (const auto& a : e.args) args.push_back(atomize(*a, out));
        return make_call(e.intr, std::move(args), e.pos);
      }
      case ExprKind::Compare:
        transform_error("comparison cannot appear in a differentiated value position", e.pos);
    }
    return nullptr;
  }

  ExprPtr atomize(const Expr& e, Block& out) {
    if (is_atom(e)) return clone(e);
    // Integer-valued subtrees (index arithmetic) stay inline.
    std::string key = print_expr(e);
    auto it = memo_.find(key);
    if (it != memo_.end()) return make_var(it->second, e.pos);
    ExprPtr rhs = lin_rhs(e, out);
    std::string name = names_.fresh("_t");
    out.push_back(make_decl(ValType::Real, name, std::move(rhs), e.pos));
    memo_.emplace(std::move(key), name);
    return make_var(name, e.pos);
  }

  NameGen& names_;
  const ActivitySet& act_;
  std::map<std::string, std::string> memo_;  // per-statement duplicate folding
};

}  // namespace

FunctionDef normalize_returns(const FunctionDef& f) {
  FunctionDef out = clone(f);
  if (out.returns_void) return out;
  out.body = normalize_block(std::move(out.body));
  NameGen names(out);
  out.body = flatten_trailing_if(std::move(out.body), names);
  return out;
}

FunctionDef linearize_for_ad(const FunctionDef& f, const std::vector<std::string>& wrt) {
  ActivitySet act = activity(f, wrt);
  FunctionDef out = clone(f);
  NameGen names(out);
  Linearizer lin(names, act);
  out.body = lin.run(out.body);
  return out;
}

std::string gradient_name(const FunctionDef& f, const std::vector<std::string>& wrt) {
  std::vector<int> indices;
  for (const auto& w : wrt) {
    int idx = f.param_index(w);
    if (idx < 0) transform_error("'" + w + "' is not a parameter of '" + f.name + "'", f.pos);
    indices.push_back(idx);
  }
  std::sort(indices.begin(), indices.end());
  size_t differentiable = 0;
  for (const auto& p : f.params)
    if (p.type != ValType::Integer) ++differentiable;
  if (indices.size() == differentiable) return f.name + "_grad";
  std::string name = f.name + "_grad";
  for (int i : indices) name += "_" + std::to_string(i);
  return name;
}

}  // namespace adc
