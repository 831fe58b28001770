#include "storykg/kg/types.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::kg {

NodeType::NodeType(std::string name) : name_(std::move(name)) {
  if (name_.empty()) throw Error(ErrorCode::InvalidField, "node type name is empty");
  for (char c : name_) {
    if (detail::is_space(c)) throw Error(ErrorCode::InvalidField, "node type name contains whitespace: '" + name_ + "'");
  }
}

std::vector<NodeType> default_type_set() {
  return {NodeType("characters"), NodeType("locations"), NodeType("objects"), NodeType("events")};
}

void validate_type_set(const std::vector<NodeType>& types) {
  if (types.empty()) throw Error(ErrorCode::InvalidField, "type set is empty");
  std::set<std::string> seen;
  for (const auto& t : types) {
    if (t.name().empty()) throw Error(ErrorCode::InvalidField, "type set contains an empty type");
    if (!seen.insert(t.name()).second) throw Error(ErrorCode::InvalidField, "duplicate type '" + t.name() + "'");
  }
}

NodeRegistry::NodeRegistry(std::vector<NodeType> type_set) : type_set_(std::move(type_set)) {}

bool NodeRegistry::has_type(const NodeType& type) const noexcept {
  return std::find(type_set_.begin(), type_set_.end(), type) != type_set_.end();
}

const Node* NodeRegistry::find(std::string_view name, const NodeType& type) const noexcept {
  auto key = detail::trim(name);
  for (const auto& node : nodes_) {
    if (node.type == type && detail::iequals(node.name, key)) return &node;
  }
  return nullptr;
}

bool NodeRegistry::upsert(Node node) {
  node.name = std::string(detail::trim(node.name));
  if (node.name.empty()) throw Error(ErrorCode::InvalidField, "node name is empty");
  if (node.name.find('\n') != std::string::npos) throw Error(ErrorCode::InvalidField, "node name contains a newline");
  if (!has_type(node.type)) throw Error(ErrorCode::InvalidField, "unknown node type '" + node.type.name() + "'");
  for (auto& existing : nodes_) {
    if (existing.type == node.type && detail::iequals(existing.name, node.name)) {
      for (auto& [key, value] : node.attributes) existing.attributes[key] = std::move(value);
      return false;
    }
  }
  nodes_.push_back(std::move(node));
  return true;
}

std::string to_string(const Provenance& p) {
  switch (p.kind) {
    case Provenance::Kind::Initial:
      return "initial";
    case Provenance::Kind::Scene:
      return "scene:" + std::to_string(p.scene);
    case Provenance::Kind::UserEdit:
      return "user_edit";
  }
  return "initial";
}

std::optional<Provenance> parse_provenance(std::string_view text) {
  if (text == "initial") return Provenance::initial();
  if (text == "user_edit") return Provenance::user_edit();
  constexpr std::string_view prefix = "scene:";
  if (text.substr(0, prefix.size()) == prefix) {
    int index = 0;
    auto digits = text.substr(prefix.size());
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && index >= 1) return Provenance::from_scene(index);
  }
  return std::nullopt;
}

bool same_fields(const KGEntry& a, const KGEntry& b) noexcept {
  return a.subject == b.subject && a.object == b.object && a.relation == b.relation &&
         a.description == b.description;
}

namespace {

bool contains_arrow(std::string_view s) {
  return s.find("->") != std::string_view::npos || s.find("\xE2\x86\x92") != std::string_view::npos;
}

std::optional<FieldProblem> check_name_field(std::string_view field, std::string_view value) {
  if (detail::trim(value).empty()) return FieldProblem{std::string(field), "must not be empty"};
  if (detail::trim(value).size() != value.size()) {
    return FieldProblem{std::string(field), "must not have leading or trailing whitespace"};
  }
  if (value.find('\n') != std::string_view::npos || value.find('\r') != std::string_view::npos) {
    return FieldProblem{std::string(field), "must not contain a newline"};
  }
  if (contains_arrow(value)) return FieldProblem{std::string(field), "must not contain the arrow separator"};
  if (value.find(" : ") != std::string_view::npos) {
    return FieldProblem{std::string(field), "must not contain the description separator ' : '"};
  }
  return std::nullopt;
}

}  // namespace

std::optional<FieldProblem> check_entry_fields(const KGEntry& e) {
  if (auto p = check_name_field("subject", e.subject)) return p;
  if (auto p = check_name_field("object", e.object)) return p;
  if (auto p = check_name_field("relation", e.relation)) return p;
  // A relation ending in ':' would be read back as the description separator.
  if (e.relation.back() == ':') return FieldProblem{"relation", "must not end with ':'"};
  if (e.description.find('\n') != std::string::npos || e.description.find('\r') != std::string::npos) {
    return FieldProblem{"description", "must not contain a newline"};
  }
  if (detail::trim(e.description).size() != e.description.size()) {
    return FieldProblem{"description", "must not have leading or trailing whitespace"};
  }
  if (e.type.name().empty()) return FieldProblem{"type", "must not be empty"};
  return std::nullopt;
}

KnowledgeGraph::KnowledgeGraph(const std::vector<NodeType>& type_set) {
  partitions_.reserve(type_set.size());
  for (const auto& t : type_set) {
    if (!has_type(t)) partitions_.push_back(Partition{t, {}});
  }
}

std::vector<NodeType> KnowledgeGraph::type_set() const {
  std::vector<NodeType> out;
  out.reserve(partitions_.size());
  for (const auto& p : partitions_) out.push_back(p.type);
  return out;
}

bool KnowledgeGraph::has_type(const NodeType& type) const noexcept { return partition(type) != nullptr; }

const Partition* KnowledgeGraph::partition(const NodeType& type) const noexcept {
  for (const auto& p : partitions_) {
    if (p.type == type) return &p;
  }
  return nullptr;
}

Partition* KnowledgeGraph::partition(const NodeType& type) noexcept {
  for (auto& p : partitions_) {
    if (p.type == type) return &p;
  }
  return nullptr;
}

void KnowledgeGraph::append(KGEntry entry) {
  auto* p = partition(entry.type);
  if (!p) throw Error(ErrorCode::InvalidField, "unknown partition type '" + entry.type.name() + "'");
  if (entry.id.empty()) throw Error(ErrorCode::InvalidField, "entry id is empty");
  if (find(entry.id)) throw Error(ErrorCode::InvalidField, "duplicate entry id '" + entry.id + "'");
  p->entries.push_back(std::move(entry));
}

const KGEntry* KnowledgeGraph::find(std::string_view id) const noexcept {
  for (const auto& p : partitions_) {
    for (const auto& e : p.entries) {
      if (e.id == id) return &e;
    }
  }
  return nullptr;
}

KGEntry* KnowledgeGraph::find(std::string_view id) noexcept {
  for (auto& p : partitions_) {
    for (auto& e : p.entries) {
      if (e.id == id) return &e;
    }
  }
  return nullptr;
}

bool KnowledgeGraph::remove(std::string_view id) {
  for (auto& p : partitions_) {
    auto it = std::find_if(p.entries.begin(), p.entries.end(), [&](const KGEntry& e) { return e.id == id; });
    if (it != p.entries.end()) {
      p.entries.erase(it);
      return true;
    }
  }
  return false;
}

std::size_t KnowledgeGraph::size() const noexcept {
  std::size_t n = 0;
  for (const auto& p : partitions_) n += p.entries.size();
  return n;
}

std::vector<KGEntry> KnowledgeGraph::entries() const {
  std::vector<KGEntry> out;
  out.reserve(size());
  for (const auto& p : partitions_) out.insert(out.end(), p.entries.begin(), p.entries.end());
  return out;
}

bool equivalent(const KnowledgeGraph& a, const KnowledgeGraph& b) {
  if (a.type_set() != b.type_set()) return false;
  for (const auto& pa : a.partitions()) {
    const auto* pb = b.partition(pa.type);
    if (pa.entries.size() != pb->entries.size()) return false;
    for (const auto& e : pa.entries) {
      auto it = std::find_if(pb->entries.begin(), pb->entries.end(), [&](const KGEntry& x) { return x.id == e.id; });
      if (it == pb->entries.end() || !(*it == e)) return false;
    }
  }
  return true;
}

}  // namespace storykg::kg
