#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "storykg/kg/types.hpp"

namespace storykg::kg {

// Case-folded, trimmed (subject, object, relation). The description is not
// part of the key.
struct TripleKey {
  std::string subject;
  std::string object;
  std::string relation;

  friend bool operator==(const TripleKey&, const TripleKey&) = default;
  friend auto operator<=>(const TripleKey&, const TripleKey&) = default;
};

TripleKey normalize_triple(const KGEntry& e);

struct CleanupResult {
  KnowledgeGraph graph;
  std::vector<KGEntry> removed;
};

// Merges entries sharing a TripleKey within a partition. The survivor keeps
// the earliest entry's id, position and fields, and takes the longest
// description (earliest wins a tie). Idempotent.
CleanupResult dedup_cleanup(const KnowledgeGraph& kg);

// Number of case-insensitive whole-word occurrences of `phrase` in `text`.
// Word characters are ASCII alphanumerics, '_' and any byte >= 0x80.
std::size_t count_whole_word(std::string_view text, std::string_view phrase);

// Deterministic scene-relevance selection: entries scored by how often their
// subject and object names occur in `prev_scene` and `context`, highest first,
// ties in graph order, at most `cap`. With no hits, the first `cap` entries.
std::vector<KGEntry> lexical_subgraph(const KnowledgeGraph& kg, std::string_view context, std::string_view prev_scene,
                                      std::size_t cap);

}  // namespace storykg::kg
