#include "storykg/kg/cleanup.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::kg {

TripleKey normalize_triple(const KGEntry& e) {
  return {detail::casefold(detail::trim(e.subject)), detail::casefold(detail::trim(e.object)),
          detail::casefold(detail::trim(e.relation))};
}

CleanupResult dedup_cleanup(const KnowledgeGraph& kg) {
  CleanupResult result{KnowledgeGraph(kg.type_set()), {}};
  for (const auto& part : kg.partitions()) {
    auto* out = result.graph.partition(part.type);
    std::map<TripleKey, std::size_t> survivor;  // key -> index in out->entries
    for (const auto& e : part.entries) {
      auto key = normalize_triple(e);
      auto [it, inserted] = survivor.try_emplace(std::move(key), out->entries.size());
      if (inserted) {
        out->entries.push_back(e);
        continue;
      }
      auto& kept = out->entries[it->second];
      if (e.description.size() > kept.description.size()) kept.description = e.description;
      result.removed.push_back(e);
    }
  }
  return result;
}

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

}  // namespace

std::size_t count_whole_word(std::string_view text, std::string_view phrase) {
  phrase = detail::trim(phrase);
  if (phrase.empty() || phrase.size() > text.size()) return 0;
  auto haystack = detail::casefold(text);
  auto needle = detail::casefold(phrase);
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    auto end = pos + needle.size();
    bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(haystack[pos - 1])) ||
                   !is_word_byte(static_cast<unsigned char>(needle.front()));
    bool right_ok = end == haystack.size() || !is_word_byte(static_cast<unsigned char>(haystack[end])) ||
                    !is_word_byte(static_cast<unsigned char>(needle.back()));
    if (left_ok && right_ok) {
      ++count;
      pos = end;
    } else {
      ++pos;
    }
  }
  return count;
}

std::vector<KGEntry> lexical_subgraph(const KnowledgeGraph& kg, std::string_view context, std::string_view prev_scene,
                                      std::size_t cap) {
  if (cap == 0) throw Error(ErrorCode::InvalidArgument, "subgraph cap must be at least 1");
  auto all = kg.entries();
  std::string text;
  text.reserve(prev_scene.size() + context.size() + 1);
  text.append(prev_scene).push_back('\n');
  text.append(context);

  std::map<std::string, std::size_t> memo;
  auto hits = [&](const std::string& name) {
    auto key = detail::casefold(detail::trim(name));
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    return memo[key] = count_whole_word(text, name);
  };

  std::vector<std::size_t> score(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) score[i] = hits(all[i].subject) + hits(all[i].object);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (score[i] > 0) order.push_back(i);
  }
  if (order.empty()) {
    order.resize(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  }
  if (order.size() > cap) order.resize(cap);

  std::vector<KGEntry> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(std::move(all[i]));
  return out;
}

}  // namespace storykg::kg
