#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "storykg/kg/types.hpp"

namespace storykg::kg {

// Text grammar for one entry:
//
//   subject -> object -> relation : description
//
// "->" and the Unicode arrow U+2192 are interchangeable. The description
// separator is the first " : " after the second arrow; when absent, a trailing
// " :" means an empty description, and otherwise the first ':' splits. Fields
// are trimmed.

inline constexpr std::string_view kArrow = " -> ";
inline constexpr std::string_view kDescriptionSeparator = " : ";

// Throws MalformedEntryError. The returned entry gets a fresh id from `ids`
// and provenance "initial".
KGEntry parse_entry(std::string_view line, const NodeType& type, IdMinter& ids);

std::string serialize_entry(const KGEntry& e);

struct LineDiagnostic {
  std::size_t line_number = 0;  // 1-based
  std::size_t offset = 0;
  std::string line;
  std::string reason;
};

struct BlockParse {
  std::vector<KGEntry> entries;
  std::vector<LineDiagnostic> diagnostics;
};

enum class ParseMode { Lenient, Strict };

// Parses every nonblank line. Leading list bullets ("- ", "* ") are ignored.
// Lenient mode turns malformed lines into diagnostics; strict mode throws on
// the first one.
BlockParse parse_graph_block(std::string_view text, const NodeType& type, ParseMode mode, IdMinter& ids);

// Canonical multi-partition text: "## <type>" header then one entry per line.
// Empty partitions still get their header.
std::string serialize_graph(const KnowledgeGraph& kg);

// Entries only, one per line, no headers.
std::string serialize_entries(const std::vector<KGEntry>& entries);

// Inverse of serialize_graph (strict). Headers must name types in `type_set`.
KnowledgeGraph parse_graph_text(std::string_view text, const std::vector<NodeType>& type_set, IdMinter& ids);

}  // namespace storykg::kg
