#include "adc/printer.hpp"

#include <charconv>
#include <cmath>

namespace adc {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

namespace {

// Precedence levels: compare < additive < multiplicative < unary < atom.
int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Compare: return 1;
    case ExprKind::Binary:
      return (e.op == BinOp::Add || e.op == BinOp::Sub) ? 2 : 3;
    case ExprKind::Neg: return 4;
    default: return 5;
  }
}

const char* binop_str(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
  }
  return "?";
}

const char* cmpop_str(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
  }
  return "?";
}

void print_expr_rec(const Expr& e, std::string& out);

void print_child(const Expr& child, int parent_prec, bool needs_higher, std::string& out) {
  bool parens = precedence(child) < parent_prec ||
                (needs_higher && precedence(child) == parent_prec);
  if (parens) out += '(';
  print_expr_rec(child, out);
  if (parens) out += ')';
}

void print_expr_rec(const Expr& e, std::string& out) {
  switch (e.kind) {
    case ExprKind::Constant:
      if (e.pi) {
        out += "PI";
      } else if (e.int_lit) {
        out += std::to_string(static_cast<long long>(e.value));
      } else {
        out += format_double(e.value);
      }
      break;
    case ExprKind::VarRef:
      out += e.name;
      break;
    case ExprKind::Neg:
      out += '-';
      // Parenthesize anything that is not an atom so that the sign binds
      // unambiguously when re-parsed.
      if (precedence(*e.args[0]) < 5) {
        out += '(';
        print_expr_rec(*e.args[0], out);
        out += ')';
      } else {
        print_expr_rec(*e.args[0], out);
      }
      break;
    case ExprKind::Binary: {
      int prec = precedence(e);
      print_child(*e.args[0], prec, false, out);
      out += ' ';
      out += binop_str(e.op);
      out += ' ';
      // -, / are left-associative: same-precedence right children need parens.
      print_child(*e.args[1], prec, true, out);
      break;
    }
    case ExprKind::Compare:
      print_child(*e.args[0], 1, true, out);
      out += ' ';
      out += cmpop_str(e.cmp);
      out += ' ';
      print_child(*e.args[1], 1, true, out);
      break;
    case ExprKind::Call: {
      out += intrinsic_name(e.intr);
      out += '(';
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        print_expr_rec(*e.args[i], out);
      }
      out += ')';
      break;
    }
    case ExprKind::Index:
      out += e.name;
      out += '[';
      print_expr_rec(*e.args[0], out);
      out += ']';
      break;
  }
}

void print_block(const Block& b, int indent, std::string& out);

void print_stmt(const Stmt& s, int indent, std::string& out) {
  out.append(indent, ' ');
  switch (s.kind) {
    case StmtKind::VarDecl:
      out += type_name(s.decl_type);
      out += ' ';
      out += s.target;
      out += " = ";
      print_expr_rec(*s.expr, out);
      out += ";\n";
      break;
    case StmtKind::Assign:
      out += s.target;
      if (s.target_indexed) {
        out += '[';
        print_expr_rec(*s.index, out);
        out += ']';
      }
      out += s.compound_add ? " += " : " = ";
      print_expr_rec(*s.expr, out);
      out += ";\n";
      break;
    case StmtKind::Return:
      out += "return ";
      print_expr_rec(*s.expr, out);
      out += ";\n";
      break;
    case StmtKind::If:
      out += "if (";
      print_expr_rec(*s.expr, out);
      out += ") {\n";
      print_block(s.then_block, indent + 2, out);
      out.append(indent, ' ');
      out += '}';
      if (!s.else_block.empty()) {
        out += " else {\n";
        print_block(s.else_block, indent + 2, out);
        out.append(indent, ' ');
        out += '}';
      }
      out += '\n';
      break;
    case StmtKind::For:
      out += "for (integer ";
      out += s.loop_var;
      out += " = ";
      print_expr_rec(*s.lo, out);
      out += "; ";
      out += s.loop_var;
      out += " < ";
      print_expr_rec(*s.hi, out);
      out += "; ";
      out += s.loop_var;
      out += " += 1) {\n";
      print_block(s.then_block, indent + 2, out);
      out.append(indent, ' ');
      out += "}\n";
      break;
    case StmtKind::CallStmt:
      out += s.callee;
      out += '(';
      for (size_t i = 0; i < s.call_args.size(); ++i) {
        if (i) out += ", ";
        print_expr_rec(*s.call_args[i], out);
      }
      out += ");\n";
      break;
  }
}

void print_block(const Block& b, int indent, std::string& out) {
  for (const auto& s : b) print_stmt(*s, indent, out);
}

void print_function(const FunctionDef& f, std::string& out) {
  std::string quals = qualifiers_to_string(f.qualifiers);
  if (!quals.empty()) {
    out += quals;
    out += ' ';
  }
  out += f.returns_void ? "void" : "real";
  out += ' ';
  out += f.name;
  out += '(';
  for (size_t i = 0; i < f.params.size(); ++i) {
    if (i) out += ", ";
    out += type_name(f.params[i].type);
    out += ' ';
    out += f.params[i].name;
  }
  out += ") {\n";
  print_block(f.body, 2, out);
  out += "}\n";
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::string out;
  print_expr_rec(e, out);
  return out;
}

std::string print(const FunctionDef& f) {
  std::string out;
  print_function(f, out);
  return out;
}

std::string print(const Module& m) {
  std::string out;
  for (size_t i = 0; i < m.functions.size(); ++i) {
    if (i) out += '\n';
    print_function(m.functions[i], out);
  }
  return out;
}

}  // namespace adc
