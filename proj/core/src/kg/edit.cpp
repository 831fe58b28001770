#include "storykg/kg/edit.hpp"

#include <algorithm>

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::kg {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void trim_in_place(std::string& s) { s = std::string(detail::trim(s)); }

void assign_trimmed(std::string& field, const std::optional<std::string>& value) {
  if (value) field = std::string(detail::trim(*value));
}

}  // namespace

KnowledgeGraph apply_edits(const KnowledgeGraph& kg, const EditSet& edits, IdMinter* ids) {
  KnowledgeGraph out = kg;
  std::vector<FieldDiagnostic> problems;
  ErrorCode code = ErrorCode::InvalidField;

  auto reject_unknown = [&](std::size_t index, const std::string& id) {
    if (problems.empty()) code = ErrorCode::UnknownEntryId;
    problems.push_back({index, "id", "unknown entry id '" + id + "'"});
  };
  auto reject_field = [&](std::size_t index, FieldProblem p) {
    problems.push_back({index, std::move(p.field), std::move(p.reason)});
  };

  for (std::size_t i = 0; i < edits.commands.size(); ++i) {
    std::visit(overloaded{
                   [&](const AddEntry& cmd) {
                     KGEntry e = cmd.entry;
                     trim_in_place(e.subject);
                     trim_in_place(e.object);
                     trim_in_place(e.relation);
                     trim_in_place(e.description);
                     if (auto p = check_entry_fields(e)) return reject_field(i, std::move(*p));
                     if (!out.has_type(e.type)) {
                       return reject_field(i, {"type", "unknown partition type '" + e.type.name() + "'"});
                     }
                     if (e.id.empty()) {
                       if (!ids) return reject_field(i, {"id", "entry id is empty"});
                       e.id = ids->mint();
                     } else if (out.find(e.id)) {
                       return reject_field(i, {"id", "entry id '" + e.id + "' already exists"});
                     }
                     if (edits.author == EditAuthor::User) e.provenance = Provenance::user_edit();
                     out.append(std::move(e));
                   },
                   [&](const RemoveEntry& cmd) {
                     if (!out.remove(cmd.id)) reject_unknown(i, cmd.id);
                   },
                   [&](const ModifyEntry& cmd) {
                     auto* e = out.find(cmd.id);
                     if (!e) return reject_unknown(i, cmd.id);
                     KGEntry next = *e;
                     assign_trimmed(next.subject, cmd.subject);
                     assign_trimmed(next.object, cmd.object);
                     assign_trimmed(next.relation, cmd.relation);
                     assign_trimmed(next.description, cmd.description);
                     if (auto p = check_entry_fields(next)) return reject_field(i, std::move(*p));
                     *e = std::move(next);
                   },
                   [&](const ReconnectEntry& cmd) {
                     auto* e = out.find(cmd.id);
                     if (!e) return reject_unknown(i, cmd.id);
                     if (!cmd.subject && !cmd.object) {
                       return reject_field(i, {"subject", "reconnect needs a new subject or object"});
                     }
                     KGEntry next = *e;
                     assign_trimmed(next.subject, cmd.subject);
                     assign_trimmed(next.object, cmd.object);
                     if (auto p = check_entry_fields(next)) return reject_field(i, std::move(*p));
                     *e = std::move(next);
                   },
               },
               edits.commands[i]);
  }

  if (!problems.empty()) throw EditRejected(code, std::move(problems));
  return out;
}

EditSet diff(const KnowledgeGraph& before, const KnowledgeGraph& after) {
  EditSet out;
  out.author = EditAuthor::System;
  std::vector<KGEntry> readds;

  for (const auto& e : before.entries()) {
    const auto* next = after.find(e.id);
    if (!next) {
      out.commands.emplace_back(RemoveEntry{e.id});
      continue;
    }
    if (next->type != e.type || next->provenance != e.provenance) {
      out.commands.emplace_back(RemoveEntry{e.id});
      readds.push_back(*next);
      continue;
    }
    if (same_fields(e, *next)) continue;
    bool endpoints_only = e.relation == next->relation && e.description == next->description;
    auto changed = [](const std::string& a, const std::string& b) {
      return a == b ? std::nullopt : std::optional<std::string>(b);
    };
    if (endpoints_only) {
      out.commands.emplace_back(
          ReconnectEntry{e.id, changed(e.subject, next->subject), changed(e.object, next->object)});
    } else {
      out.commands.emplace_back(ModifyEntry{e.id, changed(e.subject, next->subject), changed(e.object, next->object),
                                            changed(e.relation, next->relation),
                                            changed(e.description, next->description)});
    }
  }
  for (const auto& e : after.entries()) {
    bool readded = std::any_of(readds.begin(), readds.end(), [&](const KGEntry& r) { return r.id == e.id; });
    if (readded || !before.find(e.id)) out.commands.emplace_back(AddEntry{e});
  }
  return out;
}

}  // namespace storykg::kg
