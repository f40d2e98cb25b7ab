#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shapeq::csv {

struct Record {
  std::vector<std::string> fields;
  int line = 0;  ///< 1-based line where the record starts.
};

/// RFC-4180 reader: comma separated, double-quote quoting with "" escapes,
/// LF or CRLF line ends, optional UTF-8 BOM. Blank lines are skipped.
/// Throws Error(Errc::parse) naming the offending line.
std::vector<Record> read(std::string_view text);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Joins escaped fields with commas and terminates with "\n".
std::string join_row(const std::vector<std::string>& fields);

/// Strict decimal parse: finite values only, surrounding blanks trimmed,
/// an optional leading '+'. Returns nullopt for anything else.
std::optional<double> parse_number(std::string_view text);

/// Shortest text that parses back to exactly the same double.
std::string format_number(double value);

}  // namespace shapeq::csv
