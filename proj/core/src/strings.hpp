#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace storykg::detail {

bool is_space(char c) noexcept;
std::string_view trim(std::string_view s) noexcept;
std::string casefold(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;

// Splits on '\n', dropping a trailing '\r' from each line. A trailing newline
// does not produce an extra empty line.
std::vector<std::string_view> split_lines(std::string_view text);

// Truncates to at most `max_chars` UTF-8 code points without splitting a
// multi-byte sequence.
std::string utf8_prefix(std::string_view s, std::size_t max_chars);

std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hex64(std::uint64_t value);

std::size_t count_words(std::string_view s) noexcept;

}  // namespace storykg::detail
