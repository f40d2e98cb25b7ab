#include "shapeq/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "shapeq/csv.hpp"
#include "shapeq/error.hpp"

namespace shapeq::expr {

NodePtr number(double value) { return std::make_shared<Node>(Node{Number{value}}); }
NodePtr variable() { return std::make_shared<Node>(Node{Variable{}}); }
NodePtr named(Constant c) { return std::make_shared<Node>(Node{Named{c}}); }
NodePtr negate(NodePtr operand) { return std::make_shared<Node>(Node{Negate{std::move(operand)}}); }
NodePtr binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
  return std::make_shared<Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}});
}
NodePtr call(Function f, NodePtr argument) {
  return std::make_shared<Node>(Node{Call{f, std::move(argument)}});
}

namespace {

struct FunctionName {
  std::string_view name;
  Function function;
};

constexpr std::array kFunctions{
    FunctionName{"sin", Function::sin},   FunctionName{"cos", Function::cos},
    FunctionName{"exp", Function::exp},   FunctionName{"log", Function::log},
    FunctionName{"sqrt", Function::sqrt}, FunctionName{"abs", Function::abs},
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprAst parse() {
    skip_space();
    if (at_end()) fail("empty expression");
    // Optional "y =" prefix.
    std::size_t save = pos_;
    if (peek() == 'y') {
      ++pos_;
      skip_space();
      if (peek() == '=') {
        ++pos_;
      } else {
        pos_ = save;
      }
    }
    NodePtr root = sum();
    skip_space();
    if (!at_end()) fail(std::string("unexpected '") + peek() + "'");
    return ExprAst(std::move(root));
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& message, std::size_t at) const {
    throw Error(Errc::parse, message, position_of(text_, at));
  }
  [[noreturn]] void fail(const std::string& message) const { fail(message, pos_); }

  NodePtr sum() {
    NodePtr lhs = product();
    for (;;) {
      skip_space();
      char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      lhs = binary(c == '+' ? BinaryOp::add : BinaryOp::sub, lhs, product());
    }
  }

  NodePtr product() {
    NodePtr lhs = unary();
    for (;;) {
      skip_space();
      char c = peek();
      if (c == '*' && peek(1) == '*') return lhs;  // power, handled below unary
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      lhs = binary(c == '*' ? BinaryOp::mul : BinaryOp::div, lhs, unary());
    }
  }

  NodePtr unary() {
    skip_space();
    if (peek() == '-') {
      ++pos_;
      return negate(unary());
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    skip_space();
    if (peek() == '^') {
      ++pos_;
      return binary(BinaryOp::pow, base, unary());
    }
    if (peek() == '*' && peek(1) == '*') {
      pos_ += 2;
      return binary(BinaryOp::pow, base, unary());
    }
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (at_end()) fail("unexpected end of expression");
    char c = peek();
    if (c == '(') {
      std::size_t open = pos_++;
      NodePtr inner = sum();
      skip_space();
      if (peek() != ')') fail(at_end() ? "unclosed '(' opened at column " +
                                             std::to_string(position_of(text_, open).col)
                                       : std::string("expected ')' but found '") + peek() + "'");
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  NodePtr number_literal() {
    std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (peek() == '.') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    // Exponent only when digits follow, so "2e" is not swallowed as a malformed number.
    if (peek() == 'e' || peek() == 'E') {
      std::size_t k = 1;
      if (peek(k) == '+' || peek(k) == '-') ++k;
      if (std::isdigit(static_cast<unsigned char>(peek(k)))) {
        pos_ += k;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
    }
    auto literal = text_.substr(start, pos_ - start);
    double value = 0;
    auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
    if (ec != std::errc{} || ptr != literal.data() + literal.size() || !std::isfinite(value)) {
      fail("malformed number '" + std::string(literal) + "'", start);
    }
    return number(value);
  }

  NodePtr identifier() {
    std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return variable();
    if (name == "pi") return named(Constant::pi);
    if (name == "e") return named(Constant::e);
    for (const auto& f : kFunctions) {
      if (f.name != name) continue;
      skip_space();
      if (peek() != '(') fail("expected '(' after function '" + std::string(name) + "'");
      ++pos_;
      NodePtr arg = sum();
      skip_space();
      if (peek() != ')') fail("expected ')' to close call to '" + std::string(name) + "'");
      ++pos_;
      return call(f.function, arg);
    }
    fail("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

[[noreturn]] void domain_error(const std::string& what) { throw Error(Errc::domain, what); }

double checked(double v, const char* what) {
  if (!std::isfinite(v)) domain_error(std::string(what) + " is not finite");
  return v;
}

double evaluate(const Node& node, double x) {
  struct Visitor {
    double x;
    double operator()(const Number& n) const { return n.value; }
    double operator()(const Variable&) const { return x; }
    double operator()(const Named& c) const {
      return c.constant == Constant::pi ? std::numbers::pi : std::numbers::e;
    }
    double operator()(const Negate& n) const { return -evaluate(*n.operand, x); }
    double operator()(const Binary& b) const {
      double l = evaluate(*b.lhs, x);
      double r = evaluate(*b.rhs, x);
      switch (b.op) {
        case BinaryOp::add: return checked(l + r, "sum");
        case BinaryOp::sub: return checked(l - r, "difference");
        case BinaryOp::mul: return checked(l * r, "product");
        case BinaryOp::div:
          if (r == 0.0) domain_error("division by zero");
          return checked(l / r, "quotient");
        case BinaryOp::pow: return checked(std::pow(l, r), "power");
      }
      return 0.0;
    }
    double operator()(const Call& c) const {
      double v = evaluate(*c.argument, x);
      switch (c.function) {
        case Function::sin: return std::sin(v);
        case Function::cos: return std::cos(v);
        case Function::exp: return checked(std::exp(v), "exp");
        case Function::log:
          if (v <= 0.0) domain_error("log of non-positive value");
          return std::log(v);
        case Function::sqrt:
          if (v < 0.0) domain_error("sqrt of negative value");
          return std::sqrt(v);
        case Function::abs: return std::abs(v);
      }
      return 0.0;
    }
  };
  return std::visit(Visitor{x}, node.value);
}

// Binding strength used by the printer; higher binds tighter.
int precedence(const Node& node) {
  if (const auto* b = std::get_if<Binary>(&node.value)) {
    switch (b->op) {
      case BinaryOp::add:
      case BinaryOp::sub: return 1;
      case BinaryOp::mul:
      case BinaryOp::div: return 2;
      case BinaryOp::pow: return 4;
    }
  }
  if (std::holds_alternative<Negate>(node.value)) return 3;
  return 5;
}

void print(const Node& node, std::string& out);

void print_wrapped(const Node& node, bool wrap, std::string& out) {
  if (wrap) out.push_back('(');
  print(node, out);
  if (wrap) out.push_back(')');
}

void print(const Node& node, std::string& out) {
  struct Visitor {
    std::string& out;
    void operator()(const Number& n) const {
      if (n.value < 0 || std::signbit(n.value)) {
        // Only reachable for hand-built trees; the grammar has no negative literals.
        out += "(" + csv::format_number(n.value) + ")";
      } else {
        out += csv::format_number(n.value);
      }
    }
    void operator()(const Variable&) const { out += "x"; }
    void operator()(const Named& c) const { out += c.constant == Constant::pi ? "pi" : "e"; }
    void operator()(const Negate& n) const {
      out += "-";
      print_wrapped(*n.operand, precedence(*n.operand) < 3, out);
    }
    void operator()(const Binary& b) const {
      int lp = precedence(*b.lhs);
      int rp = precedence(*b.rhs);
      switch (b.op) {
        case BinaryOp::add:
        case BinaryOp::sub:
          print_wrapped(*b.lhs, lp < 1, out);
          out += b.op == BinaryOp::add ? " + " : " - ";
          print_wrapped(*b.rhs, rp <= 1, out);
          break;
        case BinaryOp::mul:
        case BinaryOp::div:
          print_wrapped(*b.lhs, lp < 2, out);
          out += b.op == BinaryOp::mul ? " * " : " / ";
          print_wrapped(*b.rhs, rp <= 2, out);
          break;
        case BinaryOp::pow:
          print_wrapped(*b.lhs, lp < 5, out);
          out += "^";
          print_wrapped(*b.rhs, rp < 3, out);
          break;
      }
    }
    void operator()(const Call& c) const {
      out += to_string(c.function);
      out += "(";
      print(*c.argument, out);
      out += ")";
    }
  };
  std::visit(Visitor{out}, node.value);
}

}  // namespace

std::string_view to_string(Function f) {
  for (const auto& entry : kFunctions) {
    if (entry.function == f) return entry.name;
  }
  return "?";
}

bool structurally_equal(const Node& a, const Node& b) {
  if (a.value.index() != b.value.index()) return false;
  struct Visitor {
    const Node& other;
    bool operator()(const Number& n) const {
      return std::get<Number>(other.value).value == n.value;
    }
    bool operator()(const Variable&) const { return true; }
    bool operator()(const Named& c) const { return std::get<Named>(other.value).constant == c.constant; }
    bool operator()(const Negate& n) const {
      return structurally_equal(*n.operand, *std::get<Negate>(other.value).operand);
    }
    bool operator()(const Binary& bin) const {
      const auto& o = std::get<Binary>(other.value);
      return o.op == bin.op && structurally_equal(*bin.lhs, *o.lhs) &&
             structurally_equal(*bin.rhs, *o.rhs);
    }
    bool operator()(const Call& c) const {
      const auto& o = std::get<Call>(other.value);
      return o.function == c.function && structurally_equal(*c.argument, *o.argument);
    }
  };
  return std::visit(Visitor{b}, a.value);
}

bool operator==(const ExprAst& a, const ExprAst& b) {
  if (a.empty() || b.empty()) return a.empty() == b.empty();
  return structurally_equal(a.root(), b.root());
}

ExprAst parse_equation(std::string_view text) { return Parser(text).parse(); }

double eval(const ExprAst& ast, double x) {
  if (ast.empty()) throw Error(Errc::parameter, "empty expression");
  return checked(evaluate(ast.root(), x), "result");
}

std::string to_string(const ExprAst& ast) {
  std::string out;
  if (!ast.empty()) print(ast.root(), out);
  return out;
}

}  // namespace shapeq::expr
