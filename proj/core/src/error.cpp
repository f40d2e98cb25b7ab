#include "shapeq/error.hpp"

namespace shapeq {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::parse: return "parse_error";
    case Errc::schema: return "schema_error";
    case Errc::validation: return "validation_error";
    case Errc::ambiguity: return "ambiguity_error";
    case Errc::empty_class: return "empty_class";
    case Errc::parameter: return "parameter_error";
    case Errc::domain: return "domain_error";
    case Errc::not_found: return "not_found";
    case Errc::format: return "format_error";
    case Errc::degenerate_sketch: return "degenerate_sketch";
    case Errc::vocabulary: return "vocabulary_error";
    case Errc::no_data: return "no_data";
    case Errc::empty_collection: return "empty_collection";
    case Errc::too_large: return "too_large";
  }
  return "error";
}

SourcePos position_of(std::string_view text, std::size_t offset) {
  SourcePos pos;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++pos.line;
      pos.col = 1;
    } else {
      ++pos.col;
    }
  }
  return pos;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code), detail_(message) {}

Error::Error(Errc code, const std::string& message, SourcePos pos)
    : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " +
                         message),
      code_(code),
      detail_(message),
      pos_(pos) {}

}  // namespace shapeq
