#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shapeq {

enum class ColumnKind { quantitative, categorical };

std::string_view to_string(ColumnKind kind);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  bool inferred = true;
  bool operator==(const Column&) const = default;
};

/// One table cell. monostate marks a missing value; quantitative columns hold
/// doubles and categorical columns hold text.
using Cell = std::variant<std::monostate, double, std::string>;
using Row = std::vector<Cell>;

inline bool is_missing(const Cell& cell) { return std::holds_alternative<std::monostate>(cell); }

/// Index of the named column, or nullopt.
std::optional<std::size_t> find_column(std::span<const Column> columns, std::string_view name);

}  // namespace shapeq
