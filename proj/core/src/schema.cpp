#include "shapeq/schema.hpp"

namespace shapeq {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::quantitative ? "quantitative" : "categorical";
}

std::optional<std::size_t> find_column(std::span<const Column> columns, std::string_view name) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

}  // namespace shapeq
