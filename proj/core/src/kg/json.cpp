#include "storykg/kg/json.hpp"

#include "storykg/error.hpp"

namespace storykg::kg {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string require_string(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
    throw Error(ErrorCode::InvalidField, std::string(key) + ": expected a string");
  }
  return j.at(key).get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) throw Error(ErrorCode::InvalidField, std::string(key) + ": expected a string");
  return j.at(key).get<std::string>();
}

void put_optional(json& j, const char* key, const std::optional<std::string>& value) {
  if (value) j[key] = *value;
}

}  // namespace

json to_json(const KGEntry& e) {
  return json{{"id", e.id},
              {"subject", e.subject},
              {"object", e.object},
              {"relation", e.relation},
              {"description", e.description},
              {"type", e.type.name()},
              {"provenance", to_string(e.provenance)}};
}

json to_json(const KnowledgeGraph& kg) {
  json parts = json::array();
  for (const auto& p : kg.partitions()) {
    json entries = json::array();
    for (const auto& e : p.entries) entries.push_back(to_json(e));
    parts.push_back(json{{"type", p.type.name()}, {"entries", std::move(entries)}});
  }
  return json{{"partitions", std::move(parts)}};
}

json to_json(const NodeRegistry& registry) {
  json types = json::array();
  for (const auto& t : registry.type_set()) types.push_back(t.name());
  json nodes = json::array();
  for (const auto& n : registry.nodes()) {
    nodes.push_back(json{{"name", n.name}, {"type", n.type.name()}, {"attributes", n.attributes}});
  }
  return json{{"types", std::move(types)}, {"nodes", std::move(nodes)}};
}

json to_json(const EditSet& edits) {
  json commands = json::array();
  for (const auto& cmd : edits.commands) {
    commands.push_back(std::visit(overloaded{
                                      [](const AddEntry& c) { return json{{"op", "add"}, {"entry", to_json(c.entry)}}; },
                                      [](const RemoveEntry& c) { return json{{"op", "remove"}, {"id", c.id}}; },
                                      [](const ModifyEntry& c) {
                                        json j{{"op", "modify"}, {"id", c.id}};
                                        put_optional(j, "subject", c.subject);
                                        put_optional(j, "object", c.object);
                                        put_optional(j, "relation", c.relation);
                                        put_optional(j, "description", c.description);
                                        return j;
                                      },
                                      [](const ReconnectEntry& c) {
                                        json j{{"op", "reconnect"}, {"id", c.id}};
                                        put_optional(j, "subject", c.subject);
                                        put_optional(j, "object", c.object);
                                        return j;
                                      },
                                  },
                                  cmd));
  }
  return json{{"author", edits.author == EditAuthor::User ? "user" : "system"}, {"commands", std::move(commands)}};
}

KGEntry entry_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidField, "entry: expected an object");
  KGEntry e;
  e.id = optional_string(j, "id").value_or("");
  e.subject = require_string(j, "subject");
  e.object = require_string(j, "object");
  e.relation = require_string(j, "relation");
  e.description = optional_string(j, "description").value_or("");
  auto type = require_string(j, "type");
  try {
    e.type = NodeType(type);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidField, "type: invalid node type '" + type + "'");
  }
  if (auto prov = optional_string(j, "provenance")) {
    auto parsed = parse_provenance(*prov);
    if (!parsed) throw Error(ErrorCode::InvalidField, "provenance: unrecognized value '" + *prov + "'");
    e.provenance = *parsed;
  }
  return e;
}

KnowledgeGraph graph_from_json(const json& j) {
  if (!j.is_object() || !j.contains("partitions") || !j.at("partitions").is_array()) {
    throw Error(ErrorCode::InvalidField, "partitions: expected an array");
  }
  std::vector<NodeType> types;
  for (const auto& p : j.at("partitions")) types.emplace_back(require_string(p, "type"));
  KnowledgeGraph kg(types);
  for (const auto& p : j.at("partitions")) {
    if (!p.contains("entries") || !p.at("entries").is_array()) {
      throw Error(ErrorCode::InvalidField, "entries: expected an array");
    }
    for (const auto& e : p.at("entries")) kg.append(entry_from_json(e));
  }
  return kg;
}

NodeRegistry registry_from_json(const json& j) {
  if (!j.is_object() || !j.contains("types") || !j.at("types").is_array()) {
    throw Error(ErrorCode::InvalidField, "types: expected an array");
  }
  std::vector<NodeType> types;
  for (const auto& t : j.at("types")) {
    if (!t.is_string()) throw Error(ErrorCode::InvalidField, "types: expected strings");
    types.emplace_back(t.get<std::string>());
  }
  NodeRegistry registry(std::move(types));
  if (j.contains("nodes")) {
    for (const auto& n : j.at("nodes")) {
      Node node{require_string(n, "name"), NodeType(require_string(n, "type")), {}};
      if (n.contains("attributes")) node.attributes = n.at("attributes").get<std::map<std::string, std::string>>();
      registry.upsert(std::move(node));
    }
  }
  return registry;
}

EditSet edit_set_from_json(const json& j) {
  EditSet out;
  std::vector<FieldDiagnostic> problems;
  if (!j.is_object() || !j.contains("commands") || !j.at("commands").is_array()) {
    throw EditRejected(ErrorCode::InvalidField, {{0, "commands", "expected an array of commands"}});
  }
  if (j.contains("author")) {
    const auto& author = j.at("author");
    if (author == "system") out.author = EditAuthor::System;
    else if (author != "user") problems.push_back({0, "author", "expected \"user\" or \"system\""});
  }
  const auto& commands = j.at("commands");
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const auto& c = commands[i];
    try {
      auto op = require_string(c, "op");
      if (op == "add") {
        if (!c.contains("entry")) throw Error(ErrorCode::InvalidField, "entry: missing");
        out.commands.emplace_back(AddEntry{entry_from_json(c.at("entry"))});
      } else if (op == "remove") {
        out.commands.emplace_back(RemoveEntry{require_string(c, "id")});
      } else if (op == "modify") {
        out.commands.emplace_back(ModifyEntry{require_string(c, "id"), optional_string(c, "subject"),
                                              optional_string(c, "object"), optional_string(c, "relation"),
                                              optional_string(c, "description")});
      } else if (op == "reconnect") {
        out.commands.emplace_back(
            ReconnectEntry{require_string(c, "id"), optional_string(c, "subject"), optional_string(c, "object")});
      } else {
        throw Error(ErrorCode::InvalidField, "op: unknown operation '" + op + "'");
      }
    } catch (const Error& err) {
      std::string message = err.what();
      auto colon = message.find(':');
      std::string field = colon == std::string::npos ? "command" : message.substr(0, colon);
      problems.push_back({i, field, message});
    } catch (const json::exception& err) {
      problems.push_back({i, "command", err.what()});
    }
  }
  if (!problems.empty()) throw EditRejected(ErrorCode::InvalidField, std::move(problems));
  return out;
}

}  // namespace storykg::kg
