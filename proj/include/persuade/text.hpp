#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace persuade::text {

bool is_valid_utf8(std::string_view input);

/// Unicode canonical composition. Throws ValidationError on invalid UTF-8.
std::string nfc(std::string_view input);

/// Compatibility composition, used by subword vocabularies that expect it.
std::string nfkc(std::string_view input);

/// Strips leading and trailing Unicode White_Space code points.
std::string trim(std::string_view input);

/// Splits on runs of Unicode White_Space; never returns empty pieces.
std::vector<std::string> split_whitespace(std::string_view input);

/// Byte offsets of every code point start in a valid UTF-8 string, plus
/// the terminal offset input.size().
std::vector<std::size_t> char_boundaries(std::string_view input);

}  // namespace persuade::text
