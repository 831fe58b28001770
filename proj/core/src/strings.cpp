#include "strings.hpp"

#include <cstdio>

#include "storykg/error.hpp"

namespace storykg {

namespace {

struct CodeName {
  ErrorCode code;
  std::string_view name;
};

constexpr CodeName kCodeNames[] = {
    {ErrorCode::MalformedEntry, "MalformedEntry"},
    {ErrorCode::UnknownEntryId, "UnknownEntryId"},
    {ErrorCode::InvalidField, "InvalidField"},
    {ErrorCode::MissingPlaceholder, "MissingPlaceholder"},
    {ErrorCode::BackendUnavailable, "BackendUnavailable"},
    {ErrorCode::BackendRejected, "BackendRejected"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::ExtractionEmpty, "ExtractionEmpty"},
    {ErrorCode::EmptyScene, "EmptyScene"},
    {ErrorCode::WrongPhase, "WrongPhase"},
    {ErrorCode::EmptyGroup, "EmptyGroup"},
    {ErrorCode::AllZeroDifferences, "AllZeroDifferences"},
    {ErrorCode::InvalidSpec, "InvalidSpec"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::StorageFailure, "StorageFailure"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::Busy, "Busy"},
    {ErrorCode::CorruptLog, "CorruptLog"},
};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& entry : kCodeNames) {
    if (entry.code == code) return entry.name;
  }
  return "Unknown";
}

bool parse_error_code(std::string_view name, ErrorCode& out) noexcept {
  for (const auto& entry : kCodeNames) {
    if (entry.name == name) {
      out = entry.code;
      return true;
    }
  }
  return false;
}

MalformedEntryError::MalformedEntryError(std::string line, std::size_t offset, std::string reason,
                                         std::size_t line_number)
    : Error(ErrorCode::MalformedEntry,
            (line_number ? "line " + std::to_string(line_number) + ", " : std::string()) + "offset " +
                std::to_string(offset) + ": " + reason),
      line_(std::move(line)),
      offset_(offset),
      reason_(std::move(reason)),
      line_number_(line_number) {}

EditRejected::EditRejected(ErrorCode code, std::vector<FieldDiagnostic> diagnostics)
    : Error(code, diagnostics.empty() ? std::string(to_string(code))
                                      : "command " + std::to_string(diagnostics.front().command_index) + ": " +
                                            diagnostics.front().message),
      diagnostics_(std::move(diagnostics)) {}

namespace detail {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && is_space(s[begin])) ++begin;
  while (end > begin && is_space(s[end - 1])) --end;
  return s.substr(begin, end - begin);
}

// ASCII-only folding; bytes >= 0x80 pass through unchanged.
std::string casefold(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    char x = a[i];
    char y = b[i];
    if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
    if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
    if (x != y) return false;
  }
  return true;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto end = nl == std::string_view::npos ? text.size() : nl;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

std::string utf8_prefix(std::string_view s, std::size_t max_chars) {
  std::size_t chars = 0;
  std::size_t i = 0;
  while (i < s.size() && chars < max_chars) {
    auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (i + len > s.size()) break;
    i += len;
    ++chars;
  }
  return std::string(s.substr(0, i));
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::size_t count_words(std::string_view s) noexcept {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

}  // namespace detail
}  // namespace storykg
