#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "storykg/kg/types.hpp"

namespace storykg::kg {

struct AddEntry {
  KGEntry entry;  // an empty id is filled from the minter on apply
  friend bool operator==(const AddEntry&, const AddEntry&) = default;
};

struct RemoveEntry {
  std::string id;
  friend bool operator==(const RemoveEntry&, const RemoveEntry&) = default;
};

struct ModifyEntry {
  std::string id;
  std::optional<std::string> subject;
  std::optional<std::string> object;
  std::optional<std::string> relation;
  std::optional<std::string> description;
  friend bool operator==(const ModifyEntry&, const ModifyEntry&) = default;
};

struct ReconnectEntry {
  std::string id;
  std::optional<std::string> subject;
  std::optional<std::string> object;
  friend bool operator==(const ReconnectEntry&, const ReconnectEntry&) = default;
};

using EditCommand = std::variant<AddEntry, RemoveEntry, ModifyEntry, ReconnectEntry>;

enum class EditAuthor { User, System };

struct EditSet {
  std::vector<EditCommand> commands;
  EditAuthor author = EditAuthor::User;

  bool empty() const noexcept { return commands.empty(); }
  friend bool operator==(const EditSet&, const EditSet&) = default;
};

// Applies commands in order and returns the new graph; `kg` is never touched.
// User-authored Adds are stamped with provenance user_edit; system-authored
// Adds keep the payload's provenance. No dedup is performed.
//
// Throws EditRejected (UnknownEntryId or InvalidField) with per-command
// diagnostics; nothing is applied in that case.
KnowledgeGraph apply_edits(const KnowledgeGraph& kg, const EditSet& edits, IdMinter* ids = nullptr);

// Minimal system-authored EditSet turning `before` into `after`, matched by id.
// Entries whose type or provenance changed are re-added. Subject/object-only
// changes become Reconnect, anything else Modify.
EditSet diff(const KnowledgeGraph& before, const KnowledgeGraph& after);

}  // namespace storykg::kg
