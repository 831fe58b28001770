#pragma once

#include <nlohmann/json.hpp>

#include "storykg/kg/edit.hpp"
#include "storykg/kg/types.hpp"

namespace storykg::kg {

// {id, subject, object, relation, description, type, provenance}
nlohmann::json to_json(const KGEntry& e);
// {"partitions": [{"type": ..., "entries": [...]}]}
nlohmann::json to_json(const KnowledgeGraph& kg);
// {"types": [...], "nodes": [{"name", "type", "attributes"}]}
nlohmann::json to_json(const NodeRegistry& registry);
// {"author": "user"|"system", "commands": [{"op": "add"|"remove"|"modify"|"reconnect", ...}]}
nlohmann::json to_json(const EditSet& edits);

// These throw Error(InvalidField) on a shape problem.
KGEntry entry_from_json(const nlohmann::json& j);
KnowledgeGraph graph_from_json(const nlohmann::json& j);
NodeRegistry registry_from_json(const nlohmann::json& j);
// Throws EditRejected(InvalidField) with one diagnostic per malformed command.
EditSet edit_set_from_json(const nlohmann::json& j);

}  // namespace storykg::kg
