#include "shapeq/filter.hpp"

#include <algorithm>
#include <cctype>

#include "shapeq/csv.hpp"
#include "shapeq/error.hpp"

namespace shapeq::filter {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

NodePtr compare(std::string attr, CompareOp op, Literal literal) {
  return std::make_shared<Node>(Node{Comparison{std::move(attr), op, std::move(literal)}});
}
NodePtr both(NodePtr lhs, NodePtr rhs) {
  return std::make_shared<Node>(Node{And{std::move(lhs), std::move(rhs)}});
}
NodePtr either(NodePtr lhs, NodePtr rhs) {
  return std::make_shared<Node>(Node{Or{std::move(lhs), std::move(rhs)}});
}
NodePtr negation(NodePtr operand) { return std::make_shared<Node>(Node{Not{std::move(operand)}}); }

Literal bare(std::string text) {
  Literal lit{std::move(text), false, std::nullopt};
  lit.number = csv::parse_number(lit.text);
  return lit;
}

Literal quoted(std::string text) {
  Literal lit{std::move(text), true, std::nullopt};
  lit.number = csv::parse_number(lit.text);
  return lit;
}

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

bool is_bare_char(char c) {
  if (std::isspace(static_cast<unsigned char>(c))) return false;
  switch (c) {
    case '(': case ')': case '\'': case '"': case '`':
    case '=': case '!': case '<': case '>':
      return false;
    default:
      return c != '\0';
  }
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char l, char r) {
           return std::toupper(static_cast<unsigned char>(l)) ==
                  std::toupper(static_cast<unsigned char>(r));
         });
}

bool is_keyword(std::string_view word) {
  return iequals(word, "AND") || iequals(word, "OR") || iequals(word, "NOT");
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  FilterAst parse() {
    skip_space();
    if (at_end()) fail("empty filter");
    NodePtr root = disjunct();
    skip_space();
    if (!at_end()) fail(std::string("unexpected '") + peek() + "'");
    return FilterAst(std::move(root));
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

  // Consumes `word` when it appears as a whole keyword at the cursor.
  bool keyword(std::string_view word) {
    skip_space();
    if (pos_ + word.size() > text_.size()) return false;
    if (!iequals(text_.substr(pos_, word.size()), word)) return false;
    if (is_name_char(peek(word.size()))) return false;
    pos_ += word.size();
    return true;
  }

  NodePtr disjunct() {
    NodePtr lhs = conjunct();
    while (keyword("OR")) lhs = either(lhs, conjunct());
    return lhs;
  }

  NodePtr conjunct() {
    NodePtr lhs = negated();
    while (keyword("AND")) lhs = both(lhs, negated());
    return lhs;
  }

  NodePtr negated() {
    if (keyword("NOT")) return negation(negated());
    skip_space();
    if (peek() == '(') {
      std::size_t open = pos_++;
      NodePtr inner = disjunct();
      skip_space();
      if (peek() != ')') {
        if (at_end()) fail("unclosed '('", open);
        fail(std::string("expected ')' but found '") + peek() + "'");
      }
      ++pos_;
      return inner;
    }
    return comparison();
  }

  NodePtr comparison() {
    skip_space();
    if (at_end()) fail("expected attribute name");
    std::size_t start = pos_;
    std::string attr;
    if (peek() == '`') {
      attr = quoted_text('`');
      if (attr.empty()) fail("empty attribute name", start);
    } else {
      while (is_name_char(peek())) attr.push_back(text_[pos_++]);
      if (attr.empty()) fail(std::string("expected attribute name but found '") + peek() + "'");
      if (is_keyword(attr)) fail("expected attribute name but found keyword '" + attr + "'", start);
    }
    CompareOp op = compare_op();
    return compare(std::move(attr), op, literal());
  }

  CompareOp compare_op() {
    skip_space();
    char c = peek();
    char n = peek(1);
    auto take = [&](std::size_t len, CompareOp op) {
      pos_ += len;
      return op;
    };
    if (c == '=') return take(n == '=' ? 2 : 1, CompareOp::eq);
    if (c == '!' && n == '=') return take(2, CompareOp::ne);
    if (c == '<' && n == '>') return take(2, CompareOp::ne);
    if (c == '<') return n == '=' ? take(2, CompareOp::le) : take(1, CompareOp::lt);
    if (c == '>') return n == '=' ? take(2, CompareOp::ge) : take(1, CompareOp::gt);
    if (at_end()) fail("expected comparison operator");
    fail(std::string("expected comparison operator but found '") + c + "'");
  }

  Literal literal() {
    skip_space();
    std::size_t start = pos_;
    if (at_end()) fail("expected literal value");
    if (peek() == '\'' || peek() == '"') return quoted(quoted_text(peek()));
    std::string text;
    while (is_bare_char(peek())) text.push_back(text_[pos_++]);
    if (text.empty()) fail(std::string("expected literal value but found '") + peek() + "'");
    if (is_keyword(text)) fail("expected literal value but found keyword '" + text + "'", start);
    return bare(std::move(text));
  }

  // Reads a delimited string; a doubled delimiter stands for itself.
  std::string quoted_text(char delim) {
    std::size_t open = pos_++;
    std::string out;
    for (;;) {
      if (at_end()) fail("unterminated quoted text", open);
      char c = text_[pos_++];
      if (c == delim) {
        if (peek() == delim) {
          out.push_back(delim);
          ++pos_;
          continue;
        }
        return out;
      }
      out.push_back(c);
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string quote_with(std::string_view text, char delim) {
  std::string out(1, delim);
  for (char c : text) {
    if (c == delim) out.push_back(delim);
    out.push_back(c);
  }
  out.push_back(delim);
  return out;
}

std::string print_attr(const std::string& attr) {
  bool plain = !attr.empty() && std::all_of(attr.begin(), attr.end(), is_name_char) &&
               !is_keyword(attr);
  return plain ? attr : quote_with(attr, '`');
}

std::string print_literal(const Literal& lit) {
  bool plain = !lit.quoted && !lit.text.empty() &&
               std::all_of(lit.text.begin(), lit.text.end(), is_bare_char) && !is_keyword(lit.text);
  return plain ? lit.text : quote_with(lit.text, '\'');
}

// OR = 1, AND = 2, NOT/comparison = 3
int precedence(const Node& node) {
  if (std::holds_alternative<Or>(node.value)) return 1;
  if (std::holds_alternative<And>(node.value)) return 2;
  return 3;
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
    void operator()(const Comparison& c) const {
      out += print_attr(c.attr);
      out += " ";
      out += to_string(c.op);
      out += " ";
      out += print_literal(c.literal);
    }
    void operator()(const And& a) const {
      print_wrapped(*a.lhs, precedence(*a.lhs) < 2, out);
      out += " AND ";
      print_wrapped(*a.rhs, precedence(*a.rhs) <= 2, out);
    }
    void operator()(const Or& o) const {
      print_wrapped(*o.lhs, false, out);
      out += " OR ";
      print_wrapped(*o.rhs, precedence(*o.rhs) <= 1, out);
    }
    void operator()(const Not& n) const {
      out += "NOT ";
      print_wrapped(*n.operand, precedence(*n.operand) < 3, out);
    }
  };
  std::visit(Visitor{out}, node.value);
}

void collect(const Node& node, std::vector<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Comparison>) {
          if (std::find(out.begin(), out.end(), n.attr) == out.end()) out.push_back(n.attr);
        } else if constexpr (std::is_same_v<T, Not>) {
          collect(*n.operand, out);
        } else {
          collect(*n.lhs, out);
          collect(*n.rhs, out);
        }
      },
      node.value);
}

}  // namespace

bool structurally_equal(const Node& a, const Node& b) {
  if (a.value.index() != b.value.index()) return false;
  return std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        const auto& o = std::get<T>(b.value);
        if constexpr (std::is_same_v<T, Comparison>) {
          return n.attr == o.attr && n.op == o.op && n.literal == o.literal;
        } else if constexpr (std::is_same_v<T, Not>) {
          return structurally_equal(*n.operand, *o.operand);
        } else {
          return structurally_equal(*n.lhs, *o.lhs) && structurally_equal(*n.rhs, *o.rhs);
        }
      },
      a.value);
}

bool operator==(const FilterAst& a, const FilterAst& b) {
  if (a.empty() || b.empty()) return a.empty() == b.empty();
  return structurally_equal(a.root(), b.root());
}

FilterAst parse_filter(std::string_view text) { return Parser(text).parse(); }

std::string to_string(const FilterAst& ast) {
  std::string out;
  if (!ast.empty()) print(ast.root(), out);
  return out;
}

std::vector<std::string> attributes(const FilterAst& ast) {
  std::vector<std::string> out;
  if (!ast.empty()) collect(ast.root(), out);
  return out;
}

struct BoundFilter::Step {
  enum class Kind { test, all, any, invert } kind;
  Test test;
  std::shared_ptr<const Step> lhs, rhs;
};

namespace {

bool ordering(CompareOp op) { return op != CompareOp::eq && op != CompareOp::ne; }

template <typename T>
bool apply(CompareOp op, const T& cell, const T& lit) {
  switch (op) {
    case CompareOp::eq: return cell == lit;
    case CompareOp::ne: return cell != lit;
    case CompareOp::lt: return cell < lit;
    case CompareOp::le: return cell <= lit;
    case CompareOp::gt: return cell > lit;
    case CompareOp::ge: return cell >= lit;
  }
  return false;
}

}  // namespace

BoundFilter::BoundFilter(const FilterAst& ast, std::span<const Column> schema) {
  if (ast.empty()) throw Error(Errc::validation, "empty filter");
  auto bind = [&](auto&& self, const Node& node) -> std::shared_ptr<const Step> {
    auto step = std::make_shared<Step>();
    if (const auto* c = std::get_if<Comparison>(&node.value)) {
      auto index = find_column(schema, c->attr);
      if (!index) throw Error(Errc::validation, "unknown attribute '" + c->attr + "'");
      const Column& col = schema[*index];
      step->kind = Step::Kind::test;
      step->test.column = *index;
      step->test.op = c->op;
      if (col.kind == ColumnKind::quantitative) {
        if (!c->literal.number) {
          throw Error(Errc::validation, "attribute '" + c->attr +
                                            "' is quantitative but compared to non-numeric '" +
                                            c->literal.text + "'");
        }
        step->test.numeric = true;
        step->test.number = *c->literal.number;
      } else {
        if (ordering(c->op)) {
          throw Error(Errc::validation, "ordering comparison '" + std::string(to_string(c->op)) +
                                            "' on categorical attribute '" + c->attr + "'");
        }
        step->test.numeric = false;
        step->test.text = c->literal.text;
      }
    } else if (const auto* a = std::get_if<And>(&node.value)) {
      step->kind = Step::Kind::all;
      step->lhs = self(self, *a->lhs);
      step->rhs = self(self, *a->rhs);
    } else if (const auto* o = std::get_if<Or>(&node.value)) {
      step->kind = Step::Kind::any;
      step->lhs = self(self, *o->lhs);
      step->rhs = self(self, *o->rhs);
    } else {
      step->kind = Step::Kind::invert;
      step->lhs = self(self, *std::get<Not>(node.value).operand);
    }
    return step;
  };
  root_ = bind(bind, ast.root());
}

bool BoundFilter::matches(std::span<const Cell> row) const {
  auto run = [&](auto&& self, const Step& step) -> bool {
    switch (step.kind) {
      case Step::Kind::test: {
        const Cell& cell = row[step.test.column];
        if (step.test.numeric) {
          const double* v = std::get_if<double>(&cell);
          return v && apply(step.test.op, *v, step.test.number);
        }
        const std::string* s = std::get_if<std::string>(&cell);
        return s && apply(step.test.op, *s, step.test.text);
      }
      case Step::Kind::all: return self(self, *step.lhs) && self(self, *step.rhs);
      case Step::Kind::any: return self(self, *step.lhs) || self(self, *step.rhs);
      case Step::Kind::invert: return !self(self, *step.lhs);
    }
    return false;
  };
  return run(run, *root_);
}

bool eval_filter(const FilterAst& ast, std::span<const Cell> row, std::span<const Column> schema) {
  return BoundFilter(ast, schema).matches(row);
}

}  // namespace shapeq::filter
