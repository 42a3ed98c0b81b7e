#pragma once

// Scalar expressions over named variables: parsing, rendering, exact symbolic
// differentiation and evaluation over any scalar type (double or Dual<...>).
//
// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          exponent must fold to an integer
//   primary := number | ident | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | log | sqrt
//
// Variables are resolved against a declared list at parse time and stored by
// index, so evaluation takes a span of values in declaration order.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geocon/dual.hpp"
#include "geocon/errors.hpp"

namespace geocon {

enum class Op { Const, Var, Neg, Sin, Cos, Exp, Log, Sqrt, Add, Sub, Mul, Div, Pow };

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  Op op = Op::Const;
  double value = 0.0;   // Const
  int var = -1;         // Var: index into the declared variable list
  std::string name;     // Var: identifier
  int exponent = 0;     // Pow
  int column = -1;      // 1-based source column, -1 for synthesized nodes
  NodePtr lhs;          // operand of unary ops, left operand of binary ops
  NodePtr rhs;
};

class Expr {
 public:
  Expr() : node_(make_const(0.0)) {}
  explicit Expr(NodePtr node) : node_(std::move(node)) {}

  static Expr constant(double v) { return Expr(make_const(v)); }
  static Expr variable(int index, std::string name, int column = -1) {
    auto n = std::make_shared<ExprNode>();
    n->op = Op::Var;
    n->var = index;
    n->name = std::move(name);
    n->column = column;
    return Expr(std::move(n));
  }
  static Expr unary(Op op, Expr a, int column = -1) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->lhs = a.node_;
    n->column = column;
    return Expr(std::move(n));
  }
  static Expr binary(Op op, Expr a, Expr b, int column = -1) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->lhs = a.node_;
    n->rhs = b.node_;
    n->column = column;
    return Expr(std::move(n));
  }
  static Expr power(Expr base, int exponent, int column = -1) {
    auto n = std::make_shared<ExprNode>();
    n->op = Op::Pow;
    n->lhs = base.node_;
    n->exponent = exponent;
    n->column = column;
    return Expr(std::move(n));
  }

  const ExprNode& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }
  Op op() const { return node_->op; }
  bool is_constant() const { return node_->op == Op::Const; }
  bool is_constant(double v) const { return is_constant() && node_->value == v; }
  bool is_zero() const { return is_constant(0.0); }
  double constant_value() const { return node_->value; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  std::string to_string() const;

 private:
  static NodePtr make_const(double v) {
    auto n = std::make_shared<ExprNode>();
    n->op = Op::Const;
    n->value = v;
    return n;
  }

  NodePtr node_;
};

// ---------------------------------------------------------------------------
// Structural equality (source columns are ignored).

inline bool structurally_equal(const ExprNode& a, const ExprNode& b) {
  if (a.op != b.op) return false;
  switch (a.op) {
    case Op::Const: return a.value == b.value;
    case Op::Var: return a.var == b.var && a.name == b.name;
    case Op::Pow: return a.exponent == b.exponent && structurally_equal(*a.lhs, *b.lhs);
    case Op::Neg:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt: return structurally_equal(*a.lhs, *b.lhs);
    default: return structurally_equal(*a.lhs, *b.lhs) && structurally_equal(*a.rhs, *b.rhs);
  }
}

inline bool operator==(const Expr& a, const Expr& b) {
  return a.ptr() == b.ptr() || structurally_equal(a.node(), b.node());
}

// ---------------------------------------------------------------------------
// Folding constructors: constant folding plus zero/one elimination.

inline Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.constant_value());
  if (a.op() == Op::Neg) return a.lhs();
  return Expr::unary(Op::Neg, a);
}

inline Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() + b.constant_value());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.op() == Op::Neg) return Expr::binary(Op::Sub, a, b.lhs());
  return Expr::binary(Op::Add, a, b);
}

inline Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() - b.constant_value());
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (b.op() == Op::Neg) return Expr::binary(Op::Add, a, b.lhs());
  return Expr::binary(Op::Sub, a, b);
}

inline Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() * b.constant_value());
  if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  if (b.is_constant()) return b * a;  // constants lead
  if (a.is_constant() && b.op() == Op::Mul && b.lhs().is_constant())
    return Expr::constant(a.constant_value() * b.lhs().constant_value()) * b.rhs();
  if (a.op() == Op::Neg) return -(a.lhs() * b);
  if (b.op() == Op::Neg) return -(a * b.lhs());
  return Expr::binary(Op::Mul, a, b);
}

inline Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
    return Expr::constant(a.constant_value() / b.constant_value());
  if (a.is_zero() && !b.is_zero()) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(-1.0)) return -a;
  return Expr::binary(Op::Div, a, b);
}

inline Expr pow(const Expr& a, int n) {
  if (n == 0) return Expr::constant(1.0);
  if (n == 1) return a;
  if (a.is_constant() && !(a.constant_value() == 0.0 && n < 0))
    return Expr::constant(powi(a.constant_value(), n));
  if (a.op() == Op::Pow) {
    long combined = static_cast<long>(a.node().exponent) * n;
    if (combined >= -1024 && combined <= 1024) return pow(a.lhs(), static_cast<int>(combined));
  }
  return Expr::power(a, n);
}

namespace detail {
inline Expr fold_unary(Op op, const Expr& a, double (*f)(double), bool in_domain) {
  if (a.is_constant() && in_domain) return Expr::constant(f(a.constant_value()));
  return Expr::unary(op, a);
}
}  // namespace detail

inline Expr sin(const Expr& a) {
  return detail::fold_unary(Op::Sin, a, [](double x) { return std::sin(x); }, true);
}
inline Expr cos(const Expr& a) {
  return detail::fold_unary(Op::Cos, a, [](double x) { return std::cos(x); }, true);
}
inline Expr exp(const Expr& a) {
  return detail::fold_unary(Op::Exp, a, [](double x) { return std::exp(x); }, true);
}
inline Expr log(const Expr& a) {
  return detail::fold_unary(Op::Log, a, [](double x) { return std::log(x); },
                            a.is_constant() && a.constant_value() > 0.0);
}
inline Expr sqrt(const Expr& a) {
  return detail::fold_unary(Op::Sqrt, a, [](double x) { return std::sqrt(x); },
                            a.is_constant() && a.constant_value() >= 0.0);
}

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }

/// Rebuilds an expression bottom-up through the folding constructors.
inline Expr fold(const Expr& e) {
  const ExprNode& n = e.node();
  switch (n.op) {
    case Op::Const:
    case Op::Var: return e;
    case Op::Neg: return -fold(e.lhs());
    case Op::Sin: return sin(fold(e.lhs()));
    case Op::Cos: return cos(fold(e.lhs()));
    case Op::Exp: return exp(fold(e.lhs()));
    case Op::Log: return log(fold(e.lhs()));
    case Op::Sqrt: return sqrt(fold(e.lhs()));
    case Op::Add: return fold(e.lhs()) + fold(e.rhs());
    case Op::Sub: return fold(e.lhs()) - fold(e.rhs());
    case Op::Mul: return fold(e.lhs()) * fold(e.rhs());
    case Op::Div: return fold(e.lhs()) / fold(e.rhs());
    case Op::Pow: return pow(fold(e.lhs()), n.exponent);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string format_number(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline int precedence(const ExprNode& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    default: return 5;
  }
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    default: return "";
  }
}

inline void render(const ExprNode& n, std::string& out);

inline void render_operand(const ExprNode& n, int min_prec, std::string& out) {
  if (precedence(n) < min_prec) {
    out += '(';
    render(n, out);
    out += ')';
  } else {
    render(n, out);
  }
}

inline void render(const ExprNode& n, std::string& out) {
  switch (n.op) {
    case Op::Const: out += format_number(n.value); return;
    case Op::Var: out += n.name; return;
    case Op::Neg:
      out += '-';
      render_operand(*n.lhs, 4, out);
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
      out += function_name(n.op);
      out += '(';
      render(*n.lhs, out);
      out += ')';
      return;
    case Op::Pow:
      render_operand(*n.lhs, 5, out);
      out += '^';
      out += std::to_string(n.exponent);
      return;
    default: break;
  }
  const bool additive = n.op == Op::Add || n.op == Op::Sub;
  render_operand(*n.lhs, additive ? 1 : 2, out);
  switch (n.op) {
    case Op::Add: out += " + "; break;
    case Op::Sub: out += " - "; break;
    case Op::Mul: out += "*"; break;
    default: out += "/"; break;
  }
  // Right operands: same-precedence binaries and signed operands get parens.
  render_operand(*n.rhs, additive ? 2 : 4, out);
}

}  // namespace detail

inline std::string Expr::to_string() const {
  std::string out;
  detail::render(*node_, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& vars) : src_(src), vars_(vars) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", column());
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", column());
    return e;
  }

 private:
  int column() const { return static_cast<int>(pos_) + 1; }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      skip_ws();
      int col = column();
      if (accept('+')) {
        lhs = Expr::binary(Op::Add, lhs, parse_product(), col);
      } else if (accept('-')) {
        lhs = Expr::binary(Op::Sub, lhs, parse_product(), col);
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      skip_ws();
      int col = column();
      if (accept('*')) {
        lhs = Expr::binary(Op::Mul, lhs, parse_unary(), col);
      } else if (accept('/')) {
        lhs = Expr::binary(Op::Div, lhs, parse_unary(), col);
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    skip_ws();
    int col = column();
    if (accept('-')) {
      Expr operand = parse_unary();
      if (operand.is_constant()) return Expr::constant(-operand.constant_value());
      return Expr::unary(Op::Neg, operand, col);
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    skip_ws();
    int col = column();
    if (accept('^')) {
      skip_ws();
      int exp_col = column();
      Expr e = fold(parse_unary());
      if (!e.is_constant()) throw ParseError("exponent must be an integer constant", exp_col);
      double v = e.constant_value();
      if (v != std::floor(v) || std::fabs(v) > 1024.0)
        throw ParseError("exponent must be an integer constant", exp_col);
      return Expr::power(base, static_cast<int>(v), col);
    }
    return base;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", column());
    int col = column();
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) throw ParseError("expected ')'", column());
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      std::string ident(src_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        Op op;
        if (ident == "sin") op = Op::Sin;
        else if (ident == "cos") op = Op::Cos;
        else if (ident == "exp") op = Op::Exp;
        else if (ident == "log") op = Op::Log;
        else if (ident == "sqrt") op = Op::Sqrt;
        else throw UnknownIdentifierError(ident, col);
        ++pos_;
        Expr arg = parse_sum();
        if (!accept(')')) throw ParseError("expected ')'", column());
        return Expr::unary(op, arg, col);
      }
      for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == ident) return Expr::variable(static_cast<int>(i), ident, col);
      throw UnknownIdentifierError(ident, col);
    }
    throw ParseError(std::string("unexpected '") + c + "'", col);
  }

  Expr parse_number() {
    int col = column();
    const char* begin = src_.data() + pos_;
    std::string buf(src_.substr(pos_));
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    std::size_t used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0) throw ParseError("malformed number", col);
    // strtod accepts hex and inf/nan spellings the grammar does not.
    for (std::size_t i = 0; i < used; ++i) {
      char ch = begin[i];
      if (!(std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == 'e' || ch == 'E' ||
            ch == '+' || ch == '-'))
        throw ParseError("malformed number", col);
    }
    pos_ += used;
    return Expr::constant(v);
  }

  std::string_view src_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses src against the declared variables. Throws ParseError or
/// UnknownIdentifierError.
inline Expr parse_expression(std::string_view src, const std::vector<std::string>& vars) {
  return detail::Parser(src, vars).parse();
}

// ---------------------------------------------------------------------------
// Differentiation

/// Exact partial derivative with respect to the variable with index var.
inline Expr differentiate(const Expr& e, int var) {
  const ExprNode& n = e.node();
  switch (n.op) {
    case Op::Const: return Expr::constant(0.0);
    case Op::Var: return Expr::constant(n.var == var ? 1.0 : 0.0);
    case Op::Neg: return -differentiate(e.lhs(), var);
    case Op::Sin: return cos(e.lhs()) * differentiate(e.lhs(), var);
    case Op::Cos: return -(sin(e.lhs()) * differentiate(e.lhs(), var));
    case Op::Exp: return e * differentiate(e.lhs(), var);
    case Op::Log: return differentiate(e.lhs(), var) / e.lhs();
    case Op::Sqrt: return differentiate(e.lhs(), var) / (Expr::constant(2.0) * e);
    case Op::Add: return differentiate(e.lhs(), var) + differentiate(e.rhs(), var);
    case Op::Sub: return differentiate(e.lhs(), var) - differentiate(e.rhs(), var);
    case Op::Mul:
      return differentiate(e.lhs(), var) * e.rhs() + e.lhs() * differentiate(e.rhs(), var);
    case Op::Div: {
      Expr da = differentiate(e.lhs(), var);
      Expr db = differentiate(e.rhs(), var);
      if (db.is_zero()) return da / e.rhs();
      return (da * e.rhs() - e.lhs() * db) / pow(e.rhs(), 2);
    }
    case Op::Pow: {
      Expr da = differentiate(e.lhs(), var);
      if (da.is_zero()) return Expr::constant(0.0);
      return Expr::constant(n.exponent) * pow(e.lhs(), n.exponent - 1) * da;
    }
  }
  return Expr::constant(0.0);
}

/// Partial derivative with respect to a variable identified by name. A name
/// absent from the expression yields zero.
inline Expr differentiate(const Expr& e, const std::string& name) {
  std::function<int(const ExprNode&)> find = [&](const ExprNode& n) -> int {
    if (n.op == Op::Var) return n.name == name ? n.var : -1;
    int r = n.lhs ? find(*n.lhs) : -1;
    if (r < 0 && n.rhs) r = find(*n.rhs);
    return r;
  };
  int idx = find(e.node());
  return idx < 0 ? Expr::constant(0.0) : differentiate(e, idx);
}

// ---------------------------------------------------------------------------
// Variable rewriting

/// Replaces every variable node by replace(index, name).
inline Expr substitute(const Expr& e, const std::function<Expr(int, const std::string&)>& replace) {
  const ExprNode& n = e.node();
  switch (n.op) {
    case Op::Const: return e;
    case Op::Var: return replace(n.var, n.name);
    case Op::Pow: return pow(substitute(e.lhs(), replace), n.exponent);
    case Op::Neg: return -substitute(e.lhs(), replace);
    case Op::Sin: return sin(substitute(e.lhs(), replace));
    case Op::Cos: return cos(substitute(e.lhs(), replace));
    case Op::Exp: return exp(substitute(e.lhs(), replace));
    case Op::Log: return log(substitute(e.lhs(), replace));
    case Op::Sqrt: return sqrt(substitute(e.lhs(), replace));
    case Op::Add: return substitute(e.lhs(), replace) + substitute(e.rhs(), replace);
    case Op::Sub: return substitute(e.lhs(), replace) - substitute(e.rhs(), replace);
    case Op::Mul: return substitute(e.lhs(), replace) * substitute(e.rhs(), replace);
    case Op::Div: return substitute(e.lhs(), replace) / substitute(e.rhs(), replace);
  }
  return e;
}

/// Adds offset to every variable index (used when a coordinate is prepended).
inline Expr shift_variables(const Expr& e, int offset) {
  return substitute(e, [offset](int i, const std::string& name) { return Expr::variable(i + offset, name); });
}

inline void collect_variables(const ExprNode& n, std::map<int, std::string>& out) {
  if (n.op == Op::Var) out.emplace(n.var, n.name);
  if (n.lhs) collect_variables(*n.lhs, out);
  if (n.rhs) collect_variables(*n.rhs, out);
}

/// Free variables as index -> name.
inline std::map<int, std::string> free_variables(const Expr& e) {
  std::map<int, std::string> out;
  collect_variables(e.node(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline std::string where(const ExprNode& n) {
  std::string s;
  render(n, s);
  return " in '" + s + "'";
}

template <class T>
T eval_node(const ExprNode& n, std::span<const T> env) {
  switch (n.op) {
    case Op::Const: return T(n.value);
    case Op::Var:
      if (n.var < 0 || static_cast<std::size_t>(n.var) >= env.size())
        throw InvalidArgument("unbound variable '" + n.name + "'");
      return env[static_cast<std::size_t>(n.var)];
    case Op::Neg: return -eval_node(*n.lhs, env);
    case Op::Sin: return sin(eval_node(*n.lhs, env));
    case Op::Cos: return cos(eval_node(*n.lhs, env));
    case Op::Exp: return exp(eval_node(*n.lhs, env));
    case Op::Log: {
      T a = eval_node(*n.lhs, env);
      if (!(scalar_value(a) > 0.0)) throw DomainError("log of nonpositive value" + where(n), n.column);
      return log(a);
    }
    case Op::Sqrt: {
      T a = eval_node(*n.lhs, env);
      if (!(scalar_value(a) >= 0.0)) throw DomainError("sqrt of negative value" + where(n), n.column);
      return sqrt(a);
    }
    case Op::Add: return eval_node(*n.lhs, env) + eval_node(*n.rhs, env);
    case Op::Sub: return eval_node(*n.lhs, env) - eval_node(*n.rhs, env);
    case Op::Mul: return eval_node(*n.lhs, env) * eval_node(*n.rhs, env);
    case Op::Div: {
      T a = eval_node(*n.lhs, env);
      T b = eval_node(*n.rhs, env);
      if (scalar_value(b) == 0.0) throw DomainError("division by zero" + where(n), n.column);
      return a / b;
    }
    case Op::Pow: {
      T a = eval_node(*n.lhs, env);
      if (n.exponent < 0 && scalar_value(a) == 0.0)
        throw DomainError("negative power of zero" + where(n), n.column);
      return powi(a, n.exponent);
    }
  }
  return T(0.0);
}

}  // namespace detail

/// Evaluates with variables bound positionally (index i -> env[i]).
template <class T>
T evaluate(const Expr& e, std::span<const T> env) {
  return detail::eval_node<T>(e.node(), env);
}

template <class T>
T evaluate(const Expr& e, const std::vector<T>& env) {
  return evaluate<T>(e, std::span<const T>(env));
}

/// Evaluates with variables bound by name. All free variables must be bound.
template <class T>
T evaluate(const Expr& e, const std::map<std::string, T>& env) {
  auto vars = free_variables(e);
  std::vector<T> slots(vars.empty() ? 0 : static_cast<std::size_t>(vars.rbegin()->first) + 1, T(0.0));
  for (const auto& [idx, name] : vars) {
    auto it = env.find(name);
    if (it == env.end()) throw InvalidArgument("unbound variable '" + name + "'");
    slots[static_cast<std::size_t>(idx)] = it->second;
  }
  return evaluate<T>(e, std::span<const T>(slots));
}

}  // namespace geocon
