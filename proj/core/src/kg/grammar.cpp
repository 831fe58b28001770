#include "storykg/kg/grammar.hpp"

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::kg {

namespace {

constexpr std::string_view kAsciiArrow = "->";
constexpr std::string_view kUnicodeArrow = "\xE2\x86\x92";

struct ArrowHit {
  std::size_t pos = std::string_view::npos;
  std::size_t len = 0;
};

ArrowHit find_arrow(std::string_view s, std::size_t from) {
  auto a = s.find(kAsciiArrow, from);
  auto u = s.find(kUnicodeArrow, from);
  if (a == std::string_view::npos && u == std::string_view::npos) return {};
  if (u == std::string_view::npos || (a != std::string_view::npos && a < u)) return {a, kAsciiArrow.size()};
  return {u, kUnicodeArrow.size()};
}

[[noreturn]] void fail(std::string_view line, std::size_t offset, std::string reason) {
  throw MalformedEntryError(std::string(line), offset, std::move(reason));
}

// Offset of `part` within `whole`; both views point into the same buffer.
std::size_t offset_of(std::string_view whole, std::string_view part) {
  return static_cast<std::size_t>(part.data() - whole.data());
}

std::string_view strip_bullet(std::string_view line) {
  auto t = detail::trim(line);
  for (std::string_view bullet : {"- ", "* ", "\xE2\x80\xA2 "}) {
    if (t.substr(0, bullet.size()) == bullet) return detail::trim(t.substr(bullet.size()));
  }
  return t;
}

}  // namespace

KGEntry parse_entry(std::string_view line, const NodeType& type, IdMinter& ids) {
  if (auto nl = line.find('\n'); nl != std::string_view::npos) fail(line, nl, "entry spans more than one line");

  auto first = find_arrow(line, 0);
  if (first.pos == std::string_view::npos) fail(line, line.size(), "expected '->' after the subject");
  auto second = find_arrow(line, first.pos + first.len);
  if (second.pos == std::string_view::npos) fail(line, line.size(), "expected a second '->' after the object");

  auto subject = detail::trim(line.substr(0, first.pos));
  auto object = detail::trim(line.substr(first.pos + first.len, second.pos - first.pos - first.len));
  auto rest_start = second.pos + second.len;
  auto rest = detail::trim(line.substr(rest_start));

  std::string_view relation;
  std::string_view description;
  if (auto sep = rest.find(kDescriptionSeparator); sep != std::string_view::npos) {
    relation = detail::trim(rest.substr(0, sep));
    description = detail::trim(rest.substr(sep + kDescriptionSeparator.size()));
  } else if (rest.size() >= 2 && rest.back() == ':' && detail::is_space(rest[rest.size() - 2])) {
    relation = detail::trim(rest.substr(0, rest.size() - 1));
  } else if (auto colon = rest.find(':'); colon != std::string_view::npos) {
    relation = detail::trim(rest.substr(0, colon));
    description = detail::trim(rest.substr(colon + 1));
  } else {
    fail(line, line.size(), "expected ' : ' before the description");
  }

  if (subject.empty()) fail(line, 0, "subject is empty");
  if (object.empty()) fail(line, first.pos + first.len, "object is empty");
  if (relation.empty()) fail(line, rest_start, "relation is empty");
  if (find_arrow(relation, 0).pos != std::string_view::npos) {
    fail(line, offset_of(line, relation), "relation contains a third arrow");
  }

  KGEntry e;
  e.subject = std::string(subject);
  e.object = std::string(object);
  e.relation = std::string(relation);
  e.description = std::string(description);
  e.type = type;
  e.provenance = Provenance::initial();
  if (auto problem = check_entry_fields(e)) {
    std::size_t offset = 0;
    if (problem->field == "object") offset = offset_of(line, object);
    else if (problem->field == "relation") offset = offset_of(line, relation);
    else if (problem->field == "description") offset = offset_of(line, description);
    fail(line, offset, problem->field + " " + problem->reason);
  }
  e.id = ids.mint();
  return e;
}

std::string serialize_entry(const KGEntry& e) {
  std::string out;
  out.reserve(e.subject.size() + e.object.size() + e.relation.size() + e.description.size() + 12);
  out.append(e.subject).append(kArrow).append(e.object).append(kArrow).append(e.relation);
  if (e.description.empty()) {
    out.append(" :");
  } else {
    out.append(kDescriptionSeparator).append(e.description);
  }
  return out;
}

BlockParse parse_graph_block(std::string_view text, const NodeType& type, ParseMode mode, IdMinter& ids) {
  BlockParse result;
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto body = strip_bullet(lines[i]);
    if (body.empty()) continue;
    try {
      result.entries.push_back(parse_entry(body, type, ids));
    } catch (const MalformedEntryError& err) {
      auto offset = offset_of(lines[i], body) + err.offset();
      if (mode == ParseMode::Strict) throw MalformedEntryError(std::string(lines[i]), offset, err.reason(), i + 1);
      result.diagnostics.push_back(LineDiagnostic{i + 1, offset, std::string(lines[i]), err.reason()});
    }
  }
  return result;
}

std::string serialize_entries(const std::vector<KGEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out.append(serialize_entry(e)).push_back('\n');
  return out;
}

std::string serialize_graph(const KnowledgeGraph& kg) {
  std::string out;
  for (const auto& p : kg.partitions()) {
    out.append("## ").append(p.type.name()).push_back('\n');
    out.append(serialize_entries(p.entries));
  }
  return out;
}

KnowledgeGraph parse_graph_text(std::string_view text, const std::vector<NodeType>& type_set, IdMinter& ids) {
  KnowledgeGraph kg(type_set);
  const NodeType* current = nullptr;
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto body = detail::trim(lines[i]);
    if (body.empty()) continue;
    if (body.substr(0, 2) == "##") {
      auto name = detail::trim(body.substr(2));
      current = nullptr;
      for (const auto& t : type_set) {
        if (t.name() == name) current = &t;
      }
      if (!current) throw MalformedEntryError(std::string(lines[i]), 3, "unknown partition type", i + 1);
      continue;
    }
    if (!current) throw MalformedEntryError(std::string(lines[i]), 0, "entry before any '## <type>' header", i + 1);
    try {
      kg.append(parse_entry(body, *current, ids));
    } catch (const MalformedEntryError& err) {
      throw MalformedEntryError(std::string(lines[i]), offset_of(lines[i], body) + err.offset(), err.reason(), i + 1);
    }
  }
  return kg;
}

}  // namespace storykg::kg
