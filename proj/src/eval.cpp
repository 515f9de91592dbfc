#include "adc/eval.hpp"

#include <atomic>
#include <cmath>
#include <map>

#include "adc/printer.hpp"
#include "adc/sema.hpp"

namespace adc {

OpCounters& OpCounters::operator+=(const OpCounters& o) {
  adds += o.adds;
  muls += o.muls;
  divs += o.divs;
  intrinsics += o.intrinsics;
  comparisons += o.comparisons;
  tape_pushes += o.tape_pushes;
  tape_pops += o.tape_pops;
  return *this;
}

ArgPack& ArgPack::add_real(double v) {
  Arg a;
  a.type = ValType::Real;
  a.real = v;
  args_.push_back(a);
  return *this;
}

ArgPack& ArgPack::add_int(int64_t v) {
  Arg a;
  a.type = ValType::Integer;
  a.integer = v;
  args_.push_back(a);
  return *this;
}

ArgPack& ArgPack::add_array(std::vector<double>& storage) {
  return add_array(storage.data(), static_cast<int64_t>(storage.size()));
}

ArgPack& ArgPack::add_array(double* data, int64_t len) {
  Arg a;
  a.type = ValType::RealArray;
  a.array = {data, len};
  args_.push_back(a);
  return *this;
}

namespace {

[[noreturn]] void eval_error(std::string msg, SourcePos pos = {}) {
  if (pos.line != 0)
    msg = "line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) + ": " +
          std::move(msg);
  throw Error(ErrorKind::Eval, std::move(msg), pos);
}

struct CExpr {
  ExprKind kind{};
  BinOp op{};
  CmpOp cmp{};
  Intrinsic intr{};
  bool is_int = false;
  double cval = 0.0;
  int64_t ival = 0;
  int slot = -1;
  int a = -1;
  int b = -1;
  SourcePos pos{};
};

enum class CK { Decl, Assign, Return, If, For, Call, Push, PushCtl };

struct CStmt {
  CK kind{};
  SourcePos pos{};
  bool target_is_int = false;
  bool indexed = false;
  bool compound = false;
  int slot = -1;
  int index = -1;
  int expr = -1;
  std::vector<CStmt> then_b;
  std::vector<CStmt> else_b;
  int lo = -1;
  int hi = -1;
  int loop_slot = -1;
  int callee = -1;
  struct CallArg {
    enum Kind { Scalar, WholeArray, Slice } kind = Scalar;
    bool scalar_is_int = false;
    int expr = -1;
    int array_slot = -1;
    int index_expr = -1;
  };
  std::vector<CallArg> cargs;
  std::string target_name;
};

struct CFunc {
  const FunctionDef* def = nullptr;
  bool is_global = false;
  int n_real = 0;
  int n_int = 0;
  int n_arr = 0;
  struct PSlot {
    ValType type{};
    int slot = -1;
  };
  std::vector<PSlot> pslots;
  std::vector<CExpr> arena;
  std::vector<CStmt> body;
  std::vector<std::string> real_names;
  int bi_block_idx = -1, bi_block_dim = -1, bi_thread_idx = -1, bi_n = -1;
};

struct VarSlot {
  ValType type{};
  int slot = -1;
};

class FnCompiler {
 public:
  FnCompiler(const FunctionDef& f, const std::map<std::string, int>& fn_index)
      : f_(f), fn_index_(fn_index) {
    out_.def = &f;
    out_.is_global = f.qualifiers.global;
  }

  CFunc run() {
    for (const auto& p : f_.params) {
      int slot = alloc(p.type, p.name);
      out_.pslots.push_back({p.type, slot});
    }
    if (out_.is_global) {
      out_.bi_block_idx = alloc(ValType::Integer, "blockIdx");
      out_.bi_block_dim = alloc(ValType::Integer, "blockDim");
      out_.bi_thread_idx = alloc(ValType::Integer, "threadIdx");
      out_.bi_n = alloc(ValType::Integer, "N");
    }
    out_.body = compile_block(f_.body);
    return std::move(out_);
  }

 private:
  int alloc(ValType t, const std::string& name) {
    int slot = 0;
    switch (t) {
      case ValType::Real:
        slot = out_.n_real++;
        out_.real_names.push_back(name);
        break;
      case ValType::Integer: slot = out_.n_int++; break;
      case ValType::RealArray: slot = out_.n_arr++; break;
    }
    vars_[name] = {t, slot};
    return slot;
  }

  const VarSlot& var(const std::string& name, SourcePos pos) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) eval_error("unbound variable '" + name + "'", pos);
    return it->second;
  }

  int compile_expr(const Expr& e) {
    CExpr c;
    c.kind = e.kind;
    c.pos = e.pos;
    switch (e.kind) {
      case ExprKind::Constant:
        c.cval = e.value;
        c.is_int = e.int_lit;
        c.ival = static_cast<int64_t>(e.value);
        break;
      case ExprKind::VarRef: {
        const VarSlot& v = var(e.name, e.pos);
        c.slot = v.slot;
        c.is_int = v.type == ValType::Integer;
        break;
      }
      case ExprKind::Neg:
        c.a = compile_expr(*e.args[0]);
        c.is_int = arena_[c.a].is_int;
        break;
      case ExprKind::Binary:
        c.op = e.op;
        c.a = compile_expr(*e.args[0]);
        c.b = compile_expr(*e.args[1]);
        c.is_int = e.op != BinOp::Div && arena_[c.a].is_int && arena_[c.b].is_int;
        break;
      case ExprKind::Compare:
        c.cmp = e.cmp;
        c.a = compile_expr(*e.args[0]);
        c.b = compile_expr(*e.args[1]);
        break;
      case ExprKind::Call:
        c.intr = e.intr;
        c.is_int = e.intr == Intrinsic::PopCtl;
        if (!e.args.empty()) c.a = compile_expr(*e.args[0]);
        if (e.args.size() > 1) c.b = compile_expr(*e.args[1]);
        break;
      case ExprKind::Index: {
        const VarSlot& v = var(e.name, e.pos);
        c.slot = v.slot;
        c.a = compile_expr(*e.args[0]);
        break;
      }
    }
    arena_.push_back(c);
    out_.arena.push_back(c);
    return static_cast<int>(arena_.size()) - 1;
  }

  std::vector<CStmt> compile_block(const Block& b) {
    std::vector<CStmt> out;
    out.reserve(b.size());
    for (const auto& s : b) out.push_back(compile_stmt(*s));
    return out;
  }

  CStmt compile_stmt(const Stmt& s) {
    CStmt c;
    c.pos = s.pos;
    switch (s.kind) {
      case StmtKind::VarDecl: {
        c.kind = CK::Decl;
        c.expr = compile_expr(*s.expr);
        int slot = alloc(s.decl_type, s.target);
        c.slot = slot;
        c.target_is_int = s.decl_type == ValType::Integer;
        c.target_name = s.target;
        break;
      }
      case StmtKind::Assign: {
        c.kind = CK::Assign;
        c.expr = compile_expr(*s.expr);
        const VarSlot& v = var(s.target, s.pos);
        c.slot = v.slot;
        c.indexed = s.target_indexed;
        c.compound = s.compound_add;
        c.target_is_int = v.type == ValType::Integer;
        c.target_name = s.target;
        if (s.target_indexed) c.index = compile_expr(*s.index);
        break;
      }
      case StmtKind::Return:
        c.kind = CK::Return;
        c.expr = compile_expr(*s.expr);
        break;
      case StmtKind::If:
        c.kind = CK::If;
        c.expr = compile_expr(*s.expr);
        c.then_b = compile_block(s.then_block);
        c.else_b = compile_block(s.else_block);
        break;
      case StmtKind::For: {
        c.kind = CK::For;
        c.lo = compile_expr(*s.lo);
        c.hi = compile_expr(*s.hi);
        c.loop_slot = alloc(ValType::Integer, s.loop_var);
        c.then_b = compile_block(s.then_block);
        break;
      }
      case StmtKind::CallStmt: {
        if (s.callee == kPushName) {
          c.kind = CK::Push;
          c.expr = compile_expr(*s.call_args[0]);
          break;
        }
        if (s.callee == kPushCtlName) {
          c.kind = CK::PushCtl;
          c.expr = compile_expr(*s.call_args[0]);
          break;
        }
        c.kind = CK::Call;
        auto it = fn_index_.find(s.callee);
        if (it == fn_index_.end()) eval_error("unknown function '" + s.callee + "'", s.pos);
        c.callee = it->second;
        c.target_name = s.callee;
        for (const auto& a : s.call_args) {
          CStmt::CallArg ca;
          if (a->kind == ExprKind::VarRef) {
            auto vit = vars_.find(a->name);
            if (vit != vars_.end() && vit->second.type == ValType::RealArray) {
              ca.kind = CStmt::CallArg::WholeArray;
              ca.array_slot = vit->second.slot;
              c.cargs.push_back(ca);
              continue;
            }
          }
          ca.kind = CStmt::CallArg::Scalar;
          ca.expr = compile_expr(*a);
          ca.scalar_is_int = arena_[ca.expr].is_int;
          c.cargs.push_back(ca);
        }
        break;
      }
    }
    return c;
  }

  const FunctionDef& f_;
  const std::map<std::string, int>& fn_index_;
  CFunc out_;
  std::vector<CExpr> arena_;  // mirror of out_.arena for type queries
  std::map<std::string, VarSlot> vars_;
};

struct Frame {
  std::vector<double> reals;
  std::vector<int64_t> ints;
  std::vector<ArrayRef> arrays;
  std::vector<double> tape;
  std::vector<int64_t> ctl;
  uint64_t statements = 0;
};

constexpr int kMaxCallDepth = 100;

}  // namespace

struct Program::Impl {
  Module module;
  std::vector<CFunc> funcs;
  std::map<std::string, int> fn_index;

  const CFunc& func(const std::string& name) const {
    auto it = fn_index.find(name);
    if (it == fn_index.end()) eval_error("unknown function '" + name + "'");
    return funcs[it->second];
  }
};

namespace {

class Interp {
 public:
  Interp(const Program::Impl& prog, const EvalOptions& opts) : prog_(prog), opts_(opts) {}

  EvalResult run(const CFunc& f, ArgPack& args) {
    Frame fr;
    bind_args(f, args, fr);
    std::optional<double> ret = exec_function(f, fr);
    EvalResult r;
    r.value = ret;
    r.counts = counts_;
    r.top_statements = fr.statements;
    return r;
  }

 private:
  void bind_args(const CFunc& f, ArgPack& args, Frame& fr) {
    const FunctionDef& def = *f.def;
    if (args.args().size() != def.params.size())
      eval_error("'" + def.name + "' expects " + std::to_string(def.params.size()) +
                 " arguments, got " + std::to_string(args.args().size()));
    fr.reals.assign(f.n_real, 0.0);
    fr.ints.assign(f.n_int, 0);
    fr.arrays.assign(f.n_arr, ArrayRef{});
    for (size_t i = 0; i < def.params.size(); ++i) {
      const auto& a = args.args()[i];
      const auto& ps = f.pslots[i];
      if (a.type != ps.type)
        eval_error("argument " + std::to_string(i + 1) + " of '" + def.name + "': expected " +
                   type_name(ps.type) + ", got " + type_name(a.type));
      switch (ps.type) {
        case ValType::Real: fr.reals[ps.slot] = a.real; break;
        case ValType::Integer: fr.ints[ps.slot] = a.integer; break;
        case ValType::RealArray: fr.arrays[ps.slot] = a.array; break;
      }
    }
    if (f.is_global) {
      if (!opts_.has_thread_ctx)
        eval_error("kernel '" + def.name + "' requires a launch context");
      fr.ints[f.bi_block_idx] = opts_.block_idx;
      fr.ints[f.bi_block_dim] = opts_.block_dim;
      fr.ints[f.bi_thread_idx] = opts_.thread_idx;
      fr.ints[f.bi_n] = opts_.problem_n;
    }
  }

  std::optional<double> exec_function(const CFunc& f, Frame& fr) {
    if (++depth_ > kMaxCallDepth) eval_error("call depth limit exceeded");
    double ret = 0.0;
    bool returned = exec_block(f, fr, f.body, ret);
    --depth_;
    if (!fr.tape.empty() || !fr.ctl.empty())
      eval_error("tape imbalance at exit of '" + f.def->name + "': " +
                 std::to_string(fr.tape.size()) + " value(s), " + std::to_string(fr.ctl.size()) +
                 " control record(s) left");
    if (f.def->returns_void) return std::nullopt;
    if (!returned) eval_error("'" + f.def->name + "' fell off the end without returning");
    return ret;
  }

  // Returns true when a return statement fired.
  bool exec_block(const CFunc& f, Frame& fr, const std::vector<CStmt>& b, double& ret) {
    for (const CStmt& s : b) {
      ++fr.statements;
      switch (s.kind) {
        case CK::Decl:
        case CK::Assign: {
          if (s.indexed) {
            int64_t idx = eval_int(f, fr, s.index);
            ArrayRef arr = fr.arrays[s.slot];
            if (idx < 0 || idx >= arr.len)
              eval_error("index " + std::to_string(idx) + " out of range for '" + s.target_name +
                             "' (length " + std::to_string(arr.len) + ")",
                         s.pos);
            double v = eval_real(f, fr, s.expr);
            if (opts_.atomic_array_writes) {
              std::atomic_ref<double> cell(arr.data[idx]);
              if (s.compound) {
                double cur = cell.load(std::memory_order_relaxed);
                while (!cell.compare_exchange_weak(cur, cur + v, std::memory_order_relaxed)) {
                }
                ++counts_.adds;
              } else {
                cell.store(v, std::memory_order_relaxed);
              }
            } else {
              if (s.compound) {
                arr.data[idx] += v;
                ++counts_.adds;
              } else {
                arr.data[idx] = v;
              }
            }
          } else if (s.target_is_int) {
            int64_t v = eval_int(f, fr, s.expr);
            if (s.compound) {
              int64_t cur = fr.ints[s.slot];
              int64_t sum = 0;
              if (__builtin_add_overflow(cur, v, &sum)) eval_error("integer overflow", s.pos);
              fr.ints[s.slot] = sum;
              ++counts_.adds;
            } else {
              fr.ints[s.slot] = v;
            }
          } else {
            double v = eval_real(f, fr, s.expr);
            if (s.compound) {
              fr.reals[s.slot] += v;
              ++counts_.adds;
            } else {
              fr.reals[s.slot] = v;
            }
            if (opts_.observer != nullptr && *opts_.observer)
              (*opts_.observer)(f.real_names[s.slot], fr.reals[s.slot]);
          }
          break;
        }
        case CK::Return:
          ret = eval_real(f, fr, s.expr);
          return true;
        case CK::If: {
          bool taken = eval_cond(f, fr, s.expr);
          if (exec_block(f, fr, taken ? s.then_b : s.else_b, ret)) return true;
          break;
        }
        case CK::For: {
          // Bounds are evaluated exactly once at loop entry; hi < lo simply
          // yields zero iterations.
          int64_t lo = eval_int(f, fr, s.lo);
          int64_t hi = eval_int(f, fr, s.hi);
          for (int64_t i = lo; i < hi; ++i) {
            fr.ints[s.loop_slot] = i;
            if (exec_block(f, fr, s.then_b, ret)) return true;
          }
          break;
        }
        case CK::Call: {
          const CFunc& callee = prog_.funcs[s.callee];
          ArgPack pack;
          for (size_t i = 0; i < s.cargs.size(); ++i) {
            const auto& ca = s.cargs[i];
            bool wants_array =
                i < callee.pslots.size() && callee.pslots[i].type == ValType::RealArray;
            if (ca.kind == CStmt::CallArg::WholeArray) {
              ArrayRef arr = fr.arrays[ca.array_slot];
              pack.add_array(arr.data, arr.len);
            } else if (wants_array) {
              // An indexed argument in array position denotes a length-1
              // slice of the caller's buffer (adjoint-slot passing style).
              const CExpr& e = f.arena[ca.expr];
              if (e.kind != ExprKind::Index)
                eval_error("argument " + std::to_string(i + 1) + " of '" + callee.def->name +
                               "' must be an array or indexed slice",
                           s.pos);
              int64_t idx = eval_int(f, fr, e.a);
              ArrayRef arr = fr.arrays[e.slot];
              if (idx < 0 || idx >= arr.len)
                eval_error("slice index " + std::to_string(idx) + " out of range (length " +
                               std::to_string(arr.len) + ")",
                           s.pos);
              pack.add_array(arr.data + idx, 1);
            } else if (ca.scalar_is_int) {
              pack.add_int(eval_int(f, fr, ca.expr));
            } else {
              pack.add_real(eval_real(f, fr, ca.expr));
            }
          }
          Frame cfr;
          bind_args(callee, pack, cfr);
          exec_function(callee, cfr);
          break;
        }
        case CK::Push:
          fr.tape.push_back(eval_real(f, fr, s.expr));
          ++counts_.tape_pushes;
          break;
        case CK::PushCtl:
          fr.ctl.push_back(eval_int(f, fr, s.expr));
          ++counts_.tape_pushes;
          break;
      }
    }
    return false;
  }

  double eval_real(const CFunc& f, Frame& fr, int id) {
    const CExpr& e = f.arena[id];
    if (e.is_int) return static_cast<double>(eval_int(f, fr, id));
    switch (e.kind) {
      case ExprKind::Constant: return e.cval;
      case ExprKind::VarRef: return fr.reals[e.slot];
      case ExprKind::Neg: {
        double v = eval_real(f, fr, e.a);
        ++counts_.adds;
        return -v;
      }
      case ExprKind::Binary: {
        double a = eval_real(f, fr, e.a);
        double b = eval_real(f, fr, e.b);
        switch (e.op) {
          case BinOp::Add: ++counts_.adds; return a + b;
          case BinOp::Sub: ++counts_.adds; return a - b;
          case BinOp::Mul: ++counts_.muls; return a * b;
          case BinOp::Div:
            if (b == 0.0) eval_error("division by zero", e.pos);
            ++counts_.divs;
            return a / b;
        }
        return 0.0;
      }
      case ExprKind::Call: return eval_call(f, fr, e);
      case ExprKind::Index: {
        int64_t idx = eval_int(f, fr, e.a);
        ArrayRef arr = fr.arrays[e.slot];
        if (idx < 0 || idx >= arr.len)
          eval_error("index " + std::to_string(idx) + " out of range (length " +
                         std::to_string(arr.len) + ")",
                     e.pos);
        if (opts_.atomic_array_writes)
          return std::atomic_ref<double>(arr.data[idx]).load(std::memory_order_relaxed);
        return arr.data[idx];
      }
      default:
        eval_error("comparison used as a value", e.pos);
    }
  }

  double eval_call(const CFunc& f, Frame& fr, const CExpr& e) {
    if (e.intr == Intrinsic::Pop) {
      if (fr.tape.empty()) eval_error("__pop on empty tape", e.pos);
      double v = fr.tape.back();
      fr.tape.pop_back();
      ++counts_.tape_pops;
      return v;
    }
    double a = e.a >= 0 ? eval_real(f, fr, e.a) : 0.0;
    ++counts_.intrinsics;
    switch (e.intr) {
      case Intrinsic::Sin: return std::sin(a);
      case Intrinsic::Cos: return std::cos(a);
      case Intrinsic::Tan: return std::tan(a);
      case Intrinsic::Exp: return std::exp(a);
      case Intrinsic::Log:
        if (a <= 0.0) eval_error("log of non-positive value", e.pos);
        return std::log(a);
      case Intrinsic::Sqrt:
        if (a < 0.0) eval_error("sqrt of negative value", e.pos);
        return std::sqrt(a);
      case Intrinsic::Pow: {
        double b = eval_real(f, fr, e.b);
        return std::pow(a, b);
      }
      case Intrinsic::Fabs: return std::fabs(a);
      default: eval_error("unexpected intrinsic", e.pos);
    }
  }

  int64_t eval_int(const CFunc& f, Frame& fr, int id) {
    const CExpr& e = f.arena[id];
    switch (e.kind) {
      case ExprKind::Constant: return e.ival;
      case ExprKind::VarRef: return fr.ints[e.slot];
      case ExprKind::Neg: {
        int64_t v = eval_int(f, fr, e.a);
        ++counts_.adds;
        if (v == INT64_MIN) eval_error("integer overflow", e.pos);
        return -v;
      }
      case ExprKind::Binary: {
        int64_t a = eval_int(f, fr, e.a);
        int64_t b = eval_int(f, fr, e.b);
        int64_t r = 0;
        bool ovf = false;
        switch (e.op) {
          case BinOp::Add:
            ovf = __builtin_add_overflow(a, b, &r);
            ++counts_.adds;
            break;
          case BinOp::Sub:
            ovf = __builtin_sub_overflow(a, b, &r);
            ++counts_.adds;
            break;
          case BinOp::Mul:
            ovf = __builtin_mul_overflow(a, b, &r);
            ++counts_.muls;
            break;
          case BinOp::Div: eval_error("integer expression cannot contain division", e.pos);
        }
        if (ovf) eval_error("integer overflow", e.pos);
        return r;
      }
      case ExprKind::Call:
        if (e.intr == Intrinsic::PopCtl) {
          if (fr.ctl.empty()) eval_error("__pop_ctl on empty control tape", e.pos);
          int64_t v = fr.ctl.back();
          fr.ctl.pop_back();
          ++counts_.tape_pops;
          return v;
        }
        eval_error("intrinsic is not integer-valued", e.pos);
      default:
        eval_error("expected integer expression", e.pos);
    }
  }

  bool eval_cond(const CFunc& f, Frame& fr, int id) {
    const CExpr& e = f.arena[id];
    if (e.kind != ExprKind::Compare) eval_error("condition must be a comparison", e.pos);
    ++counts_.comparisons;
    const CExpr& lhs = f.arena[e.a];
    const CExpr& rhs = f.arena[e.b];
    if (lhs.is_int && rhs.is_int) {
      int64_t a = eval_int(f, fr, e.a);
      int64_t b = eval_int(f, fr, e.b);
      switch (e.cmp) {
        case CmpOp::Lt: return a < b;
        case CmpOp::Le: return a <= b;
        case CmpOp::Gt: return a > b;
        case CmpOp::Ge: return a >= b;
        case CmpOp::Eq: return a == b;
        case CmpOp::Ne: return a != b;
      }
    }
    double a = eval_real(f, fr, e.a);
    double b = eval_real(f, fr, e.b);
    switch (e.cmp) {
      case CmpOp::Lt: return a < b;
      case CmpOp::Le: return a <= b;
      case CmpOp::Gt: return a > b;
      case CmpOp::Ge: return a >= b;
      case CmpOp::Eq: return a == b;
      case CmpOp::Ne: return a != b;
    }
    return false;
  }

  const Program::Impl& prog_;
  const EvalOptions& opts_;
  OpCounters counts_;
  int depth_ = 0;
};

}  // namespace

Program::Program(Module m) : impl_(std::make_unique<Impl>()) {
  check_module(m);
  impl_->module = std::move(m);
  for (size_t i = 0; i < impl_->module.functions.size(); ++i)
    impl_->fn_index[impl_->module.functions[i].name] = static_cast<int>(i);
  impl_->funcs.reserve(impl_->module.functions.size());
  for (const auto& f : impl_->module.functions)
    impl_->funcs.push_back(FnCompiler(f, impl_->fn_index).run());
}

Program::~Program() = default;
Program::Program(Program&&) noexcept = default;
Program& Program::operator=(Program&&) noexcept = default;

const Module& Program::module() const { return impl_->module; }

EvalResult Program::eval(const std::string& fn, ArgPack& args, const EvalOptions& opts) const {
  const CFunc& f = impl_->func(fn);
  Interp interp(*impl_, opts);
  return interp.run(f, args);
}

ArgPack make_derivative_args(const FunctionDef& derived, const FunctionDef& primal,
                             const ArgPack& primal_args,
                             std::vector<std::vector<double>>& storage) {
  ArgPack out = primal_args;
  for (size_t i = primal.params.size(); i < derived.params.size(); ++i) {
    const Param& p = derived.params[i];
    if (p.type != ValType::RealArray)
      throw Error(ErrorKind::Eval, "unexpected extra parameter '" + p.name + "'");
    std::string src = p.name.rfind("_d_", 0) == 0 ? p.name.substr(3) : p.name;
    int idx = primal.param_index(src);
    size_t len = 1;
    if (idx >= 0 && primal.params[idx].type == ValType::RealArray) {
      if (static_cast<size_t>(idx) >= primal_args.args().size())
        throw Error(ErrorKind::Eval, "missing argument for '" + src + "'");
      len = static_cast<size_t>(primal_args.args()[idx].array.len);
    }
    storage.emplace_back(len, 0.0);
    out.add_array(storage.back());
  }
  return out;
}

CostRatioResult cost_ratio(const Program& p, const std::string& primal,
                           const std::string& gradient, const ArgPack& primal_args) {
  const FunctionDef* pf = p.module().find(primal);
  const FunctionDef* gf = p.module().find(gradient);
  if (pf == nullptr || gf == nullptr)
    throw Error(ErrorKind::Eval, "cost_ratio: unknown function");
  CostRatioResult r;
  ArgPack pa = primal_args;
  r.primal = p.eval(primal, pa).counts;
  std::vector<std::vector<double>> storage;
  storage.reserve(gf->params.size());
  ArgPack ga = make_derivative_args(*gf, *pf, primal_args, storage);
  r.gradient = p.eval(gradient, ga).counts;
  if (r.primal.total() == 0) {
    r.ratio = std::numeric_limits<double>::infinity();
    r.warning = "primal op count is zero; ratio reported as +infinity";
  } else {
    r.ratio = static_cast<double>(r.gradient.total()) / static_cast<double>(r.primal.total());
  }
  return r;
}

}  // namespace adc
