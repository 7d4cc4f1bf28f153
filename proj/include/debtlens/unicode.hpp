#pragma once

#include <string>
#include <string_view>
#include <vector>

// Minimal UTF-8 and character-class helpers. Character classes cover the
// scripts that show up in issue trackers (Latin, Greek, Cyrillic, Armenian,
// Hebrew, Arabic, Indic, Thai, CJK, Hangul) rather than the full Unicode
// database.
namespace debtlens::unicode {

/// Decodes UTF-8; invalid sequences become U+FFFD, one per bad byte.
std::u32string decode(std::string_view bytes);
void append_utf8(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

bool is_letter(char32_t cp);
bool is_number(char32_t cp);
bool is_space(char32_t cp);
bool is_emoji(char32_t cp);
char32_t to_lower(char32_t cp);

}  // namespace debtlens::unicode
