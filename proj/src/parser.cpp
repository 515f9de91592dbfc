#include "adc/parser.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace adc {

namespace {

enum class Tok {
  End,
  Ident,
  Number,
  KwDevice,
  KwHost,
  KwGlobal,
  KwReal,
  KwVoid,
  KwInteger,
  KwIf,
  KwElse,
  KwFor,
  KwReturn,
  KwPi,
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Comma,
  Semi,
  Plus,
  Minus,
  Star,
  Slash,
  Assign,
  PlusAssign,
  Lt,
  Le,
  Gt,
  Ge,
  EqEq,
  Ne,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double num = 0.0;
  bool int_lit = false;
  SourcePos pos{};
};

const char* token_desc(Tok t) {
  switch (t) {
    case Tok::End: return "end of input";
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::KwDevice: return "'device'";
    case Tok::KwHost: return "'host'";
    case Tok::KwGlobal: return "'global'";
    case Tok::KwReal: return "'real'";
    case Tok::KwVoid: return "'void'";
    case Tok::KwInteger: return "'integer'";
    case Tok::KwIf: return "'if'";
    case Tok::KwElse: return "'else'";
    case Tok::KwFor: return "'for'";
    case Tok::KwReturn: return "'return'";
    case Tok::KwPi: return "'PI'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Semi: return "';'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Assign: return "'='";
    case Tok::PlusAssign: return "'+='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::EqEq: return "'=='";
    case Tok::Ne: return "'!='";
  }
  return "?";
}

struct ParseFailure {
  Diagnostic diag;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.pos = {line_, col_};
    if (at_end()) return t;
    char c = peek();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(t);
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(t);
    advance();
    switch (c) {
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case '{': t.kind = Tok::LBrace; return t;
      case '}': t.kind = Tok::RBrace; return t;
      case '[': t.kind = Tok::LBracket; return t;
      case ']': t.kind = Tok::RBracket; return t;
      case ',': t.kind = Tok::Comma; return t;
      case ';': t.kind = Tok::Semi; return t;
      case '+':
        t.kind = eat('=') ? Tok::PlusAssign : Tok::Plus;
        return t;
      case '-': t.kind = Tok::Minus; return t;
      case '*': t.kind = Tok::Star; return t;
      case '/': t.kind = Tok::Slash; return t;
      case '=':
        t.kind = eat('=') ? Tok::EqEq : Tok::Assign;
        return t;
      case '<':
        t.kind = eat('=') ? Tok::Le : Tok::Lt;
        return t;
      case '>':
        t.kind = eat('=') ? Tok::Ge : Tok::Gt;
        return t;
      case '!':
        if (eat('=')) {
          t.kind = Tok::Ne;
          return t;
        }
        fail(t.pos, "unexpected '!'");
      default: break;
    }
    fail(t.pos, std::string("unexpected character '") + c + "'");
  }

  [[noreturn]] static void fail(SourcePos pos, std::string msg) {
    throw ParseFailure{Diagnostic{pos, std::move(msg)}};
  }

 private:
  bool at_end() const { return idx_ >= src_.size(); }
  char peek() const { return src_[idx_]; }

  void advance() {
    if (src_[idx_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++idx_;
  }

  bool eat(char c) {
    if (!at_end() && peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (!at_end()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && idx_ + 1 < src_.size() && src_[idx_ + 1] == '/') {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  Token lex_ident(Token t) {
    size_t start = idx_;
    while (!at_end() &&
           (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
      advance();
    t.text.assign(src_.substr(start, idx_ - start));
    if (t.text == "device") t.kind = Tok::KwDevice;
    else if (t.text == "host") t.kind = Tok::KwHost;
    else if (t.text == "global") t.kind = Tok::KwGlobal;
    else if (t.text == "real") t.kind = Tok::KwReal;
    else if (t.text == "void") t.kind = Tok::KwVoid;
    else if (t.text == "integer") t.kind = Tok::KwInteger;
    else if (t.text == "if") t.kind = Tok::KwIf;
    else if (t.text == "else") t.kind = Tok::KwElse;
    else if (t.text == "for") t.kind = Tok::KwFor;
    else if (t.text == "return") t.kind = Tok::KwReturn;
    else if (t.text == "PI") t.kind = Tok::KwPi;
    else t.kind = Tok::Ident;
    return t;
  }

  Token lex_number(Token t) {
    size_t start = idx_;
    bool has_dot = false, has_exp = false;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
    if (!at_end() && peek() == '.') {
      has_dot = true;
      advance();
      if (at_end() || !std::isdigit(static_cast<unsigned char>(peek())))
        fail({line_, col_}, "digit expected after decimal point");
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      has_exp = true;
      advance();
      if (!at_end() && (peek() == '+' || peek() == '-')) advance();
      if (at_end() || !std::isdigit(static_cast<unsigned char>(peek())))
        fail({line_, col_}, "digit expected in exponent");
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    std::string text(src_.substr(start, idx_ - start));
    t.kind = Tok::Number;
    t.num = std::strtod(text.c_str(), nullptr);
    t.int_lit = !has_dot && !has_exp &&
                t.num >= -9007199254740992.0 && t.num <= 9007199254740992.0;
    return t;
  }

  std::string_view src_;
  size_t idx_ = 0;
  uint32_t line_ = 1;
  uint32_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { advance(); }

  Module parse_module() {
    Module m;
    while (cur_.kind != Tok::End) m.functions.push_back(parse_function());
    return m;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  [[noreturn]] void expected(const char* what) {
    Lexer::fail(cur_.pos, std::string("expected ") + what + ", found " +
                              token_desc(cur_.kind));
  }

  Token expect(Tok k, const char* what) {
    if (cur_.kind != k) expected(what);
    Token t = std::move(cur_);
    advance();
    return t;
  }

  bool accept(Tok k) {
    if (cur_.kind == k) {
      advance();
      return true;
    }
    return false;
  }

  FunctionDef parse_function() {
    FunctionDef f;
    f.pos = cur_.pos;
    while (true) {
      if (accept(Tok::KwDevice)) f.qualifiers.device = true;
      else if (accept(Tok::KwHost)) f.qualifiers.host = true;
      else if (accept(Tok::KwGlobal)) f.qualifiers.global = true;
      else break;
    }
    if (accept(Tok::KwReal)) f.returns_void = false;
    else if (accept(Tok::KwVoid)) f.returns_void = true;
    else expected("'real' or 'void' return type");
    f.name = expect(Tok::Ident, "function name").text;
    expect(Tok::LParen, "'('");
    if (cur_.kind != Tok::RParen) {
      do {
        f.params.push_back(parse_param());
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    f.body = parse_block();
    return f;
  }

  Param parse_param() {
    Param p;
    p.pos = cur_.pos;
    if (accept(Tok::KwReal)) {
      p.type = ValType::Real;
      if (accept(Tok::LBracket)) {
        expect(Tok::RBracket, "']'");
        p.type = ValType::RealArray;
      }
    } else if (accept(Tok::KwInteger)) {
      p.type = ValType::Integer;
    } else {
      expected("parameter type ('real', 'real[]' or 'integer')");
    }
    p.name = expect(Tok::Ident, "parameter name").text;
    return p;
  }

  Block parse_block() {
    expect(Tok::LBrace, "'{'");
    Block b;
    while (cur_.kind != Tok::RBrace) {
      if (cur_.kind == Tok::End) expected("'}'");
      b.push_back(parse_stmt());
    }
    advance();  // consume '}'
    return b;
  }

  StmtPtr parse_stmt() {
    SourcePos pos = cur_.pos;
    switch (cur_.kind) {
      case Tok::KwReal:
      case Tok::KwInteger: {
        ValType t = cur_.kind == Tok::KwReal ? ValType::Real : ValType::Integer;
        advance();
        std::string name = expect(Tok::Ident, "variable name").text;
        expect(Tok::Assign, "'=' (declarations require an initializer)");
        ExprPtr init = parse_expr();
        expect(Tok::Semi, "';'");
        return make_decl(t, std::move(name), std::move(init), pos);
      }
      case Tok::KwReturn: {
        advance();
        ExprPtr e = parse_expr();
        expect(Tok::Semi, "';'");
        return make_return(std::move(e), pos);
      }
      case Tok::KwIf: return parse_if();
      case Tok::KwFor: return parse_for();
      case Tok::Ident: return parse_assign_or_call();
      default: expected("statement");
    }
  }

  StmtPtr parse_if() {
    SourcePos pos = cur_.pos;
    advance();
    expect(Tok::LParen, "'('");
    ExprPtr cond = parse_expr();
    expect(Tok::RParen, "')'");
    Block then_b = parse_block();
    Block else_b;
    if (accept(Tok::KwElse)) else_b = parse_block();
    return make_if(std::move(cond), std::move(then_b), std::move(else_b), pos);
  }

  // for (integer i = LO; i < HI; i += 1) BLOCK
  // Bounds are evaluated once at loop entry; the induction step must be
  // written `i += 1` or `i = i + 1`.
  StmtPtr parse_for() {
    SourcePos pos = cur_.pos;
    advance();
    expect(Tok::LParen, "'('");
    expect(Tok::KwInteger, "'integer' loop variable declaration");
    std::string var = expect(Tok::Ident, "loop variable").text;
    expect(Tok::Assign, "'='");
    ExprPtr lo = parse_expr();
    expect(Tok::Semi, "';'");
    Token v2 = expect(Tok::Ident, "loop variable in bound check");
    if (v2.text != var) Lexer::fail(v2.pos, "loop bound must test the loop variable '" + var + "'");
    expect(Tok::Lt, "'<'");
    ExprPtr hi = parse_expr();
    expect(Tok::Semi, "';'");
    Token v3 = expect(Tok::Ident, "loop variable in increment");
    if (v3.text != var)
      Lexer::fail(v3.pos, "loop increment must step the loop variable '" + var + "'");
    if (accept(Tok::PlusAssign)) {
      Token one = expect(Tok::Number, "literal 1");
      if (one.num != 1.0) Lexer::fail(one.pos, "loop step must be 1");
    } else {
      expect(Tok::Assign, "'+=' or '='");
      Token v4 = expect(Tok::Ident, "loop variable");
      if (v4.text != var) Lexer::fail(v4.pos, "loop increment must be '" + var + " + 1'");
      expect(Tok::Plus, "'+'");
      Token one = expect(Tok::Number, "literal 1");
      if (one.num != 1.0) Lexer::fail(one.pos, "loop step must be 1");
    }
    expect(Tok::RParen, "')'");
    Block body = parse_block();
    return make_for(std::move(var), std::move(lo), std::move(hi), std::move(body), pos);
  }

  StmtPtr parse_assign_or_call() {
    SourcePos pos = cur_.pos;
    std::string name = cur_.text;
    advance();
    if (cur_.kind == Tok::LParen) {
      advance();
      std::vector<ExprPtr> args;
      if (cur_.kind != Tok::RParen) {
        do {
          args.push_back(parse_expr());
        } while (accept(Tok::Comma));
      }
      expect(Tok::RParen, "')'");
      expect(Tok::Semi, "';'");
      return make_call_stmt(std::move(name), std::move(args), pos);
    }
    ExprPtr idx;
    bool indexed = false;
    if (accept(Tok::LBracket)) {
      indexed = true;
      idx = parse_expr();
      expect(Tok::RBracket, "']'");
    }
    bool compound = false;
    if (accept(Tok::PlusAssign)) compound = true;
    else expect(Tok::Assign, "'=' or '+='");
    ExprPtr rhs = parse_expr();
    expect(Tok::Semi, "';'");
    if (indexed)
      return make_assign_indexed(std::move(name), std::move(idx), std::move(rhs), compound, pos);
    return make_assign(std::move(name), std::move(rhs), compound, pos);
  }

  // expr := additive [cmp additive]
  ExprPtr parse_expr() {
    ExprPtr lhs = parse_additive();
    CmpOp op;
    switch (cur_.kind) {
      case Tok::Lt: op = CmpOp::Lt; break;
      case Tok::Le: op = CmpOp::Le; break;
      case Tok::Gt: op = CmpOp::Gt; break;
      case Tok::Ge: op = CmpOp::Ge; break;
      case Tok::EqEq: op = CmpOp::Eq; break;
      case Tok::Ne: op = CmpOp::Ne; break;
      default: return lhs;
    }
    SourcePos pos = cur_.pos;
    advance();
    ExprPtr rhs = parse_additive();
    return make_cmp(op, std::move(lhs), std::move(rhs), pos);
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      BinOp op = cur_.kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
      SourcePos pos = cur_.pos;
      advance();
      ExprPtr rhs = parse_multiplicative();
      lhs = make_bin(op, std::move(lhs), std::move(rhs), pos);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      BinOp op = cur_.kind == Tok::Star ? BinOp::Mul : BinOp::Div;
      SourcePos pos = cur_.pos;
      advance();
      ExprPtr rhs = parse_unary();
      lhs = make_bin(op, std::move(lhs), std::move(rhs), pos);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (cur_.kind == Tok::Minus) {
      SourcePos pos = cur_.pos;
      advance();
      ExprPtr inner = parse_unary();
      // Fold a negated literal into a signed constant.
      if (inner->kind == ExprKind::Constant && !inner->pi) {
        inner->value = -inner->value;
        inner->pos = pos;
        return inner;
      }
      return make_neg(std::move(inner), pos);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    SourcePos pos = cur_.pos;
    switch (cur_.kind) {
      case Tok::Number: {
        auto e = make_const(cur_.num, cur_.int_lit, pos);
        advance();
        return e;
      }
      case Tok::KwPi: {
        advance();
        return make_pi(pos);
      }
      case Tok::LParen: {
        advance();
        ExprPtr e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        std::string name = cur_.text;
        advance();
        if (accept(Tok::LParen)) {
          std::vector<ExprPtr> args;
          if (cur_.kind != Tok::RParen) {
            do {
              args.push_back(parse_expr());
            } while (accept(Tok::Comma));
          }
          expect(Tok::RParen, "')'");
          Intrinsic intr;
          if (!lookup_intrinsic(name, intr))
            Lexer::fail(pos, "unknown intrinsic '" + name +
                                 "' (user functions cannot appear in expressions)");
          if (static_cast<int>(args.size()) != intrinsic_arity(intr))
            Lexer::fail(pos, "intrinsic '" + name + "' takes " +
                                 std::to_string(intrinsic_arity(intr)) + " argument(s), got " +
                                 std::to_string(args.size()));
          return make_call(intr, std::move(args), pos);
        }
        if (accept(Tok::LBracket)) {
          ExprPtr idx = parse_expr();
          expect(Tok::RBracket, "']'");
          return make_index(std::move(name), std::move(idx), pos);
        }
        return make_var(std::move(name), pos);
      }
      default: expected("expression");
    }
  }

  Lexer lex_;
  Token cur_;
};

}  // namespace

ParseResult parse(std::string_view source) {
  ParseResult r;
  try {
    Parser p(source);
    r.module = p.parse_module();
  } catch (const ParseFailure& f) {
    r.error = f.diag;
  }
  return r;
}

Module parse_or_throw(std::string_view source) {
  ParseResult r = parse(source);
  if (!r.ok()) throw Error(ErrorKind::Semantic, r.error->to_string(), r.error->pos);
  return std::move(*r.module);
}

}  // namespace adc
