#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace convsv::text {

// Invalid sequences decode to U+FFFD.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view cps);

char32_t to_lower(char32_t cp);
bool is_alnum(char32_t cp);

std::u32string lowercase(std::u32string_view cps);

// Lowercase tokens split on non-alphanumeric code points. An apostrophe (' or
// U+2019) between two alphanumerics stays inside the token as '.
std::vector<std::string> tokenize(std::string_view utf8);

std::string_view trim(std::string_view s);

}  // namespace convsv::text
