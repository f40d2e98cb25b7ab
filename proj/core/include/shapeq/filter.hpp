#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shapeq/schema.hpp"

namespace shapeq::filter {

enum class CompareOp { eq, ne, lt, le, gt, ge };

std::string_view to_string(CompareOp op);

/// Right-hand side of a comparison. Bare tokens that read as numbers carry
/// `number`; quoted literals are always text but still compare numerically
/// against quantitative columns when their text is a number.
struct Literal {
  std::string text;
  bool quoted = false;
  std::optional<double> number;
  bool operator==(const Literal&) const = default;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Comparison {
  std::string attr;
  CompareOp op;
  Literal literal;
};
struct And {
  NodePtr lhs, rhs;
};
struct Or {
  NodePtr lhs, rhs;
};
struct Not {
  NodePtr operand;
};

struct Node {
  std::variant<Comparison, And, Or, Not> value;
};

class FilterAst {
 public:
  FilterAst() = default;
  explicit FilterAst(NodePtr root) : root_(std::move(root)) {}
  const Node& root() const { return *root_; }
  bool empty() const { return !root_; }
  friend bool operator==(const FilterAst& a, const FilterAst& b);

 private:
  NodePtr root_;
};

NodePtr compare(std::string attr, CompareOp op, Literal literal);
NodePtr both(NodePtr lhs, NodePtr rhs);
NodePtr either(NodePtr lhs, NodePtr rhs);
NodePtr negation(NodePtr operand);

Literal bare(std::string text);
Literal quoted(std::string text);

bool structurally_equal(const Node& a, const Node& b);

/// Parses a boolean predicate over named attributes.
///
///   filter     := disjunct
///   disjunct   := conjunct { "OR" conjunct }
///   conjunct   := negated { "AND" negated }
///   negated    := "NOT" negated | "(" disjunct ")" | comparison
///   comparison := attr op literal
///   op         := "=" | "==" | "!=" | "<>" | "<" | "<=" | ">" | ">="
///   attr       := name | `quoted name`
///   literal    := bare-token | 'text' | "text"
///
/// Keywords are case-insensitive. Throws Error(Errc::parse) with a position.
FilterAst parse_filter(std::string_view text);

/// Re-parseable text with minimal parentheses.
std::string to_string(const FilterAst& ast);

/// Attribute names referenced by the filter, in first-appearance order.
std::vector<std::string> attributes(const FilterAst& ast);

/// A filter checked against a schema with attribute names resolved to
/// column indices. Rows must follow the schema's column order.
class BoundFilter {
 public:
  /// Throws Error(Errc::validation) on unknown attributes, ordering
  /// comparisons on categorical columns, or non-numeric literals compared
  /// against quantitative columns.
  BoundFilter(const FilterAst& ast, std::span<const Column> schema);

  /// Comparisons against missing cells are false.
  bool matches(std::span<const Cell> row) const;

 private:
  struct Test {
    std::size_t column;
    CompareOp op;
    bool numeric;
    double number;
    std::string text;
  };
  struct Step;
  std::shared_ptr<const Step> root_;
};

/// Convenience: validates then evaluates one row.
bool eval_filter(const FilterAst& ast, std::span<const Cell> row, std::span<const Column> schema);

}  // namespace shapeq::filter
