#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shapeq {

enum class Errc {
  parse,
  schema,
  validation,
  ambiguity,
  empty_class,
  parameter,
  domain,
  not_found,
  format,
  degenerate_sketch,
  vocabulary,
  no_data,
  empty_collection,
  too_large,
};

std::string_view to_string(Errc code);

/// 1-based line/column of a diagnostic inside parsed text.
struct SourcePos {
  int line = 1;
  int col = 1;
  bool operator==(const SourcePos&) const = default;
};

/// Computes the 1-based line/column of a byte offset.
SourcePos position_of(std::string_view text, std::size_t offset);

/// Every failure raised by the library. Positioned errors render as
/// "line:col: message".
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Error(Errc code, const std::string& message, SourcePos pos);

  Errc code() const noexcept { return code_; }
  const std::optional<SourcePos>& position() const noexcept { return pos_; }
  /// Message without the position prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
  std::optional<SourcePos> pos_;
};

}  // namespace shapeq
