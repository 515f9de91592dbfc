/// AST for the differentiable DSL. Nodes are plain structs owned through
/// unique_ptr; every node carries the source position it was parsed from
/// (generated nodes inherit the position of the statement they derive from).
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace adc {

struct SourcePos {
  uint32_t line = 0;
  uint32_t column = 0;
};

enum class BinOp { Add, Sub, Mul, Div };
enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };

/// Math intrinsics form the elementary-operation alphabet; the two tape
/// intrinsics only ever appear in generated derivative code.
enum class Intrinsic { Sin, Cos, Tan, Exp, Log, Sqrt, Pow, Fabs, Pop, PopCtl };

const char* intrinsic_name(Intrinsic i);
bool lookup_intrinsic(const std::string& name, Intrinsic& out);
int intrinsic_arity(Intrinsic i);

enum class ValType { Real, RealArray, Integer };

const char* type_name(ValType t);

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class ExprKind {
  Constant,  // value (int_lit / pi are print hints)
  VarRef,    // name
  Neg,       // args[0]
  Binary,    // op, args[0], args[1]
  Compare,   // cmp, args[0], args[1]
  Call,      // intr, args
  Index,     // name, args[0]
};

struct Expr {
  ExprKind kind{};
  SourcePos pos{};
  double value = 0.0;
  bool int_lit = false;
  bool pi = false;
  std::string name;
  BinOp op{};
  CmpOp cmp{};
  Intrinsic intr{};
  std::vector<ExprPtr> args;
};

ExprPtr clone(const Expr& e);
bool structurally_equal(const Expr& a, const Expr& b);

// Factories used by the parser and the derivative generators.
ExprPtr make_const(double v, bool int_lit = false, SourcePos pos = {});
ExprPtr make_int_const(long long v, SourcePos pos = {});
ExprPtr make_pi(SourcePos pos = {});
ExprPtr make_var(std::string name, SourcePos pos = {});
ExprPtr make_neg(ExprPtr e, SourcePos pos = {});
ExprPtr make_bin(BinOp op, ExprPtr a, ExprPtr b, SourcePos pos = {});
ExprPtr make_cmp(CmpOp op, ExprPtr a, ExprPtr b, SourcePos pos = {});
ExprPtr make_call(Intrinsic intr, std::vector<ExprPtr> args, SourcePos pos = {});
ExprPtr make_index(std::string name, ExprPtr idx, SourcePos pos = {});

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;
using Block = std::vector<StmtPtr>;

enum class StmtKind {
  VarDecl,   // decl_type, target, expr
  Assign,    // target [, index if target_indexed], compound_add, expr
  Return,    // expr
  If,        // expr (condition), then_block, else_block
  For,       // loop_var, lo, hi, then_block (body)
  CallStmt,  // callee, call_args; also __push / __push_ctl
};

struct Stmt {
  StmtKind kind{};
  SourcePos pos{};
  ValType decl_type = ValType::Real;
  std::string target;
  bool target_indexed = false;
  bool compound_add = false;
  ExprPtr index;
  ExprPtr expr;
  Block then_block;
  Block else_block;
  std::string loop_var;
  ExprPtr lo;
  ExprPtr hi;
  std::string callee;
  std::vector<ExprPtr> call_args;
};

StmtPtr clone(const Stmt& s);
Block clone(const Block& b);
bool structurally_equal(const Stmt& a, const Stmt& b);
bool structurally_equal(const Block& a, const Block& b);

StmtPtr make_decl(ValType t, std::string name, ExprPtr init, SourcePos pos = {});
StmtPtr make_assign(std::string name, ExprPtr rhs, bool compound = false, SourcePos pos = {});
StmtPtr make_assign_indexed(std::string name, ExprPtr idx, ExprPtr rhs, bool compound = false,
                            SourcePos pos = {});
StmtPtr make_return(ExprPtr e, SourcePos pos = {});
StmtPtr make_if(ExprPtr cond, Block then_b, Block else_b, SourcePos pos = {});
StmtPtr make_for(std::string var, ExprPtr lo, ExprPtr hi, Block body, SourcePos pos = {});
StmtPtr make_call_stmt(std::string callee, std::vector<ExprPtr> args, SourcePos pos = {});

/// Names the statement-level tape intrinsics recognised by the evaluator.
inline constexpr const char* kPushName = "__push";
inline constexpr const char* kPushCtlName = "__push_ctl";

struct QualSet {
  bool device = false;
  bool host = false;
  bool global = false;

  bool operator==(const QualSet&) const = default;
  bool empty() const { return !device && !host && !global; }
};

std::string qualifiers_to_string(const QualSet& q);

struct Param {
  std::string name;
  ValType type = ValType::Real;
  SourcePos pos{};
};

struct FunctionDef {
  std::string name;
  QualSet qualifiers;
  bool returns_void = false;
  std::vector<Param> params;
  Block body;
  SourcePos pos{};

  int param_index(const std::string& pname) const;
};

FunctionDef clone(const FunctionDef& f);
bool structurally_equal(const FunctionDef& a, const FunctionDef& b);

struct Module {
  std::vector<FunctionDef> functions;

  const FunctionDef* find(const std::string& name) const;
};

Module clone(const Module& m);
bool structurally_equal(const Module& a, const Module& b);

/// Built-in integer symbols available inside `global` kernels only.
bool is_kernel_builtin(const std::string& name);

}  // namespace adc
