#include "govprobe/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "govprobe/error.hpp"

namespace govprobe {

std::string normalize_lemma(std::string_view lemma) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");

  icu::UnicodeString text = icu::UnicodeString::fromUTF8(icu::StringPiece(lemma.data(), static_cast<int32_t>(lemma.size())));
  text.toLower(icu::Locale::getRoot());
  icu::UnicodeString normalized = nfc->normalize(text, status);
  if (U_FAILURE(status)) throw ValidationError("cannot normalize lemma '" + std::string(lemma) + "'");

  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

bool starts_with(std::string_view text, std::string_view prefix) { return text.starts_with(prefix); }

}  // namespace govprobe
