#include "govprobe/types.hpp"

#include <string>

#include "govprobe/error.hpp"

namespace govprobe {

std::string_view to_string(Label label) { return label == Label::Positive ? "POSITIVE" : "NEGATIVE"; }

Label parse_label(std::string_view text) {
  if (text == "POSITIVE") return Label::Positive;
  if (text == "NEGATIVE") return Label::Negative;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

}  // namespace govprobe
