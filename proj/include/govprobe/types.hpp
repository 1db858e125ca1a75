#pragma once

#include <compare>
#include <cstdint>
#include <string_view>

namespace govprobe {

enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

/// One attention head, addressed by 0-based layer and head number.
struct HeadCell {
  int layer = 0;
  int head = 0;
  auto operator<=>(const HeadCell&) const = default;
};

}  // namespace govprobe
