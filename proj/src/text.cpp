#include "persuade/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "persuade/errors.hpp"

namespace persuade::text {
namespace {

icu::UnicodeString to_unicode(std::string_view input) {
  if (!is_valid_utf8(input)) throw ValidationError("text is not valid UTF-8");
  return icu::UnicodeString::fromUTF8(icu::StringPiece(input.data(), static_cast<int32_t>(input.size())));
}

std::string normalize_with(const icu::Normalizer2& normalizer, std::string_view input) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString normalized = normalizer.normalize(to_unicode(input), status);
  if (U_FAILURE(status)) throw ValidationError(std::string("normalization failed: ") + u_errorName(status));
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

// Decodes the code point starting at byte offset i and advances i.
UChar32 next_code_point(std::string_view input, std::size_t& i) {
  int32_t offset = static_cast<int32_t>(i);
  UChar32 c = 0;
  U8_NEXT(reinterpret_cast<const uint8_t*>(input.data()), offset,
          static_cast<int32_t>(input.size()), c);
  i = static_cast<std::size_t>(offset);
  return c;
}

}  // namespace

bool is_valid_utf8(std::string_view input) {
  std::size_t i = 0;
  while (i < input.size()) {
    if (next_code_point(input, i) < 0) return false;
  }
  return true;
}

std::string nfc(std::string_view input) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw RuntimeFailure("ICU NFC normalizer unavailable");
  return normalize_with(*normalizer, input);
}

std::string nfkc(std::string_view input) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw RuntimeFailure("ICU NFKC normalizer unavailable");
  return normalize_with(*normalizer, input);
}

std::string trim(std::string_view input) {
  std::size_t first = input.size();
  std::size_t last = 0;
  std::size_t i = 0;
  while (i < input.size()) {
    const std::size_t start = i;
    const UChar32 c = next_code_point(input, i);
    if (c < 0 || !u_isUWhiteSpace(c)) {
      if (first == input.size()) first = start;
      last = i;
    }
  }
  if (first == input.size()) return {};
  return std::string(input.substr(first, last - first));
}

std::vector<std::string> split_whitespace(std::string_view input) {
  std::vector<std::string> pieces;
  std::string current;
  std::size_t i = 0;
  while (i < input.size()) {
    const std::size_t start = i;
    const UChar32 c = next_code_point(input, i);
    if (c >= 0 && u_isUWhiteSpace(c)) {
      if (!current.empty()) pieces.push_back(std::move(current));
      current.clear();
    } else {
      current.append(input.substr(start, i - start));
    }
  }
  if (!current.empty()) pieces.push_back(std::move(current));
  return pieces;
}

std::vector<std::size_t> char_boundaries(std::string_view input) {
  std::vector<std::size_t> bounds;
  std::size_t i = 0;
  while (i < input.size()) {
    bounds.push_back(i);
    next_code_point(input, i);
  }
  bounds.push_back(input.size());
  return bounds;
}

}  // namespace persuade::text
