#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>

namespace shapeq::expr {

enum class BinaryOp { add, sub, mul, div, pow };
enum class Function { sin, cos, exp, log, sqrt, abs };
enum class Constant { pi, e };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Number {
  double value;
};
struct Variable {};
struct Named {
  Constant constant;
};
struct Negate {
  NodePtr operand;
};
struct Binary {
  BinaryOp op;
  NodePtr lhs;
  NodePtr rhs;
};
struct Call {
  Function function;
  NodePtr argument;
};

/// Immutable expression tree over the single variable x.
struct Node {
  std::variant<Number, Variable, Named, Negate, Binary, Call> value;
};

/// Shared, immutable parse result. Cheap to copy across threads.
class ExprAst {
 public:
  ExprAst() = default;
  explicit ExprAst(NodePtr root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  bool empty() const { return !root_; }

  friend bool operator==(const ExprAst& a, const ExprAst& b);

 private:
  NodePtr root_;
};

NodePtr number(double value);
NodePtr variable();
NodePtr named(Constant c);
NodePtr negate(NodePtr operand);
NodePtr binary(BinaryOp op, NodePtr lhs, NodePtr rhs);
NodePtr call(Function f, NodePtr argument);

bool structurally_equal(const Node& a, const Node& b);

/// Parses an arithmetic expression in x. An optional leading "y=" is stripped.
/// Grammar (whitespace-insensitive):
///
///   equation := [ "y" "=" ] sum
///   sum      := product { ("+" | "-") product }
///   product  := unary { ("*" | "/") unary }
///   unary    := "-" unary | power
///   power    := primary [ ("^" | "**") unary ]
///   primary  := number | "x" | "pi" | "e" | func "(" sum ")" | "(" sum ")"
///
/// Throws Error(Errc::parse) with a line:col position.
ExprAst parse_equation(std::string_view text);

/// Evaluates at x. Throws Error(Errc::domain) for log(v<=0), sqrt(v<0),
/// division by zero and any other non-finite intermediate or result.
double eval(const ExprAst& ast, double x);

/// Re-parseable text using the minimal parentheses the grammar needs.
std::string to_string(const ExprAst& ast);

std::string_view to_string(Function f);

}  // namespace shapeq::expr
