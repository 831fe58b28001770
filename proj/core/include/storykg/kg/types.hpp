#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace storykg::kg {

// A partition label such as "characters" or "locations".
class NodeType {
 public:
  NodeType() = default;
  // Throws Error(InvalidField) on an empty, whitespace-only or
  // whitespace-containing name.
  explicit NodeType(std::string name);

  const std::string& name() const noexcept { return name_; }

  friend bool operator==(const NodeType&, const NodeType&) = default;
  friend auto operator<=>(const NodeType&, const NodeType&) = default;

 private:
  std::string name_;
};

std::vector<NodeType> default_type_set();

// Throws InvalidField on an empty list or a repeated type.
void validate_type_set(const std::vector<NodeType>& types);

struct Node {
  std::string name;
  NodeType type;
  std::map<std::string, std::string> attributes;

  friend bool operator==(const Node&, const Node&) = default;
};

// The node set tracked alongside the graph. Lookup is by (case-folded name,
// type).
class NodeRegistry {
 public:
  NodeRegistry() = default;
  explicit NodeRegistry(std::vector<NodeType> type_set);

  const std::vector<NodeType>& type_set() const noexcept { return type_set_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  bool empty() const noexcept { return nodes_.empty(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool has_type(const NodeType& type) const noexcept;
  const Node* find(std::string_view name, const NodeType& type) const noexcept;

  // Inserts a new node, or merges attributes into the existing one. Returns
  // true when a node was added.
  bool upsert(Node node);

  friend bool operator==(const NodeRegistry&, const NodeRegistry&) = default;

 private:
  std::vector<NodeType> type_set_;
  std::vector<Node> nodes_;
};

struct Provenance {
  enum class Kind { Initial, Scene, UserEdit };

  Kind kind = Kind::Initial;
  int scene = 0;  // meaningful only for Kind::Scene

  static Provenance initial() { return {}; }
  static Provenance from_scene(int index) { return {Kind::Scene, index}; }
  static Provenance user_edit() { return {Kind::UserEdit, 0}; }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// "initial", "scene:3", "user_edit"
std::string to_string(const Provenance& p);
std::optional<Provenance> parse_provenance(std::string_view text);

// One "A -> B -> R : D" relationship.
struct KGEntry {
  std::string id;
  std::string subject;
  std::string object;
  std::string relation;
  std::string description;
  NodeType type;
  Provenance provenance;

  friend bool operator==(const KGEntry&, const KGEntry&) = default;
};

// True when subject/object/relation/description match; ids, types and
// provenance are ignored.
bool same_fields(const KGEntry& a, const KGEntry& b) noexcept;

// Empty when the entry satisfies the field invariants; otherwise the name of
// the first offending field and a reason.
struct FieldProblem {
  std::string field;
  std::string reason;
};
std::optional<FieldProblem> check_entry_fields(const KGEntry& e);

// Mints "e<N>" identifiers from a counter so that runs replay bit-exactly.
class IdMinter {
 public:
  explicit IdMinter(std::uint64_t next = 1) : next_(next) {}

  std::string mint() { return "e" + std::to_string(next_++); }
  std::uint64_t peek() const noexcept { return next_; }

 private:
  std::uint64_t next_;
};

struct Partition {
  NodeType type;
  std::vector<KGEntry> entries;

  friend bool operator==(const Partition&, const Partition&) = default;
};

// Type-partitioned entry store. Partitions follow the type-set order given at
// construction.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(const std::vector<NodeType>& type_set);

  const std::vector<Partition>& partitions() const noexcept { return partitions_; }
  std::vector<NodeType> type_set() const;

  bool has_type(const NodeType& type) const noexcept;
  const Partition* partition(const NodeType& type) const noexcept;
  Partition* partition(const NodeType& type) noexcept;

  // Throws InvalidField if the type is unknown or the id is already in use.
  void append(KGEntry entry);

  const KGEntry* find(std::string_view id) const noexcept;
  KGEntry* find(std::string_view id) noexcept;
  bool remove(std::string_view id);

  std::size_t size() const noexcept;
  bool empty() const noexcept { return size() == 0; }
  // Entries in partition order, then insertion order.
  std::vector<KGEntry> entries() const;

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

 private:
  std::vector<Partition> partitions_;
};

// Order-insensitive comparison: same partitions holding the same entries by
// id, with all fields equal.
bool equivalent(const KnowledgeGraph& a, const KnowledgeGraph& b);

}  // namespace storykg::kg
