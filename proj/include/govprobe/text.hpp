#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace govprobe {

/// Unicode NFC followed by root-locale lowercasing. Used as the lookup key for lemmas.
std::string normalize_lemma(std::string_view lemma);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
bool starts_with(std::string_view text, std::string_view prefix);

}  // namespace govprobe
