#include "storykg/pipeline/state.hpp"

#include "storykg/error.hpp"
#include "storykg/kg/json.hpp"
#include "strings.hpp"

namespace storykg::pipeline {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::InvalidSpec, message); }

template <class T>
T read_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(std::string(key) + ": wrong type");
  }
}

json context_json(const ContextSummary& c) {
  json basis = json::array();
  for (const auto& [index, generation] : c.basis) basis.push_back({index, generation});
  return json{{"text", c.text}, {"basis", std::move(basis)}};
}

ContextSummary context_from_json(const json& j) {
  ContextSummary c;
  c.text = j.at("text").get<std::string>();
  for (const auto& pair : j.at("basis")) c.basis.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
  return c;
}

json phase_json(const Phase& p) {
  static constexpr const char* kNames[] = {"Initializing", "Generating", "AwaitingEdit", "Finished"};
  return json{{"kind", kNames[static_cast<int>(p.kind)]}, {"scene", p.scene}};
}

Phase phase_from_json(const json& j) {
  auto kind = j.at("kind").get<std::string>();
  int scene = j.at("scene").get<int>();
  if (kind == "Initializing") return Phase::initializing();
  if (kind == "Generating") return Phase::generating(scene);
  if (kind == "AwaitingEdit") return Phase::awaiting_edit(scene);
  if (kind == "Finished") return Phase::finished();
  throw Error(ErrorCode::InvalidArgument, "unknown phase '" + kind + "'");
}

}  // namespace

void validate(const StorySpec& spec) {
  if (spec.scene_count < 1) invalid("scene_count must be at least 1");
  if (spec.query_cap < 1) invalid("query_cap must be at least 1");
  if (spec.kg_enabled) {
    try {
      kg::validate_type_set(spec.type_set);
    } catch (const Error& err) {
      invalid(std::string("type_set: ") + err.what());
    }
  }
}

json to_json(const StorySpec& spec) {
  auto j = story_prompt_json(spec);
  j["kg_enabled"] = spec.kg_enabled;
  j["edit_mode"] = spec.edit_mode;
  j["llm_cleanup"] = spec.llm_cleanup;
  return j;
}

json story_prompt_json(const StorySpec& spec) {
  json types = json::array();
  for (const auto& t : spec.type_set) types.push_back(t.name());
  return json{{"title", spec.title},
              {"genre", spec.genre},
              {"protagonists", spec.protagonists},
              {"description", spec.description},
              {"type_set", std::move(types)},
              {"scene_count", spec.scene_count},
              {"query_cap", spec.query_cap}};
}

StorySpec spec_from_json(const json& j) {
  if (!j.is_object()) invalid("story spec must be a JSON object");
  StorySpec spec;
  spec.title = read_or<std::string>(j, "title", "");
  spec.genre = read_or<std::string>(j, "genre", "");
  spec.protagonists = read_or<std::string>(j, "protagonists", "");
  spec.description = read_or<std::string>(j, "description", "");
  if (j.contains("type_set") && !j.at("type_set").is_null()) {
    if (!j.at("type_set").is_array()) invalid("type_set: expected an array of strings");
    spec.type_set.clear();
    for (const auto& t : j.at("type_set")) {
      if (!t.is_string()) invalid("type_set: expected an array of strings");
      try {
        spec.type_set.emplace_back(t.get<std::string>());
      } catch (const Error& err) {
        invalid(std::string("type_set: ") + err.what());
      }
    }
  }
  auto scenes = read_or<long long>(j, "scene_count", kDefaultSceneCount);
  if (scenes < 1 || scenes > 1000) invalid("scene_count must be between 1 and 1000");
  spec.scene_count = static_cast<int>(scenes);
  auto cap = read_or<long long>(j, "query_cap", static_cast<long long>(kDefaultQueryCap));
  if (cap < 1) invalid("query_cap must be at least 1");
  spec.query_cap = static_cast<std::size_t>(cap);
  spec.kg_enabled = read_or<bool>(j, "kg_enabled", true);
  spec.edit_mode = read_or<bool>(j, "edit_mode", false);
  spec.llm_cleanup = read_or<bool>(j, "llm_cleanup", false);
  validate(spec);
  return spec;
}

std::string to_string(const Phase& phase) {
  switch (phase.kind) {
    case Phase::Kind::Initializing:
      return "Initializing";
    case Phase::Kind::Generating:
      return "Generating(" + std::to_string(phase.scene) + ")";
    case Phase::Kind::AwaitingEdit:
      return "AwaitingEdit(" + std::to_string(phase.scene) + ")";
    case Phase::Kind::Finished:
      return "Finished";
  }
  return "Initializing";
}

json to_json(const PipelineState& state) {
  json scenes = json::array();
  for (const auto& s : state.scenes) {
    scenes.push_back(json{{"index", s.index}, {"text", s.text}, {"generation", s.generation}});
  }
  json snapshots = json::array();
  for (const auto& [index, snap] : state.snapshots) {
    snapshots.push_back(json{{"scene", index}, {"graph", kg::to_json(snap.graph)}, {"context", context_json(snap.context)}});
  }
  return json{{"spec", to_json(state.spec)},
              {"registry", kg::to_json(state.registry)},
              {"graph", kg::to_json(state.graph)},
              {"context", context_json(state.context)},
              {"scenes", std::move(scenes)},
              {"cursor", state.cursor},
              {"phase", phase_json(state.phase)},
              {"snapshots", std::move(snapshots)},
              {"next_entry_id", state.next_entry_id}};
}

PipelineState state_from_json(const json& j) {
  try {
    PipelineState state;
    state.spec = spec_from_json(j.at("spec"));
    state.registry = kg::registry_from_json(j.at("registry"));
    state.graph = kg::graph_from_json(j.at("graph"));
    state.context = context_from_json(j.at("context"));
    for (const auto& s : j.at("scenes")) {
      state.scenes.push_back(
          Scene{s.at("index").get<int>(), s.at("text").get<std::string>(), s.at("generation").get<int>()});
    }
    state.cursor = j.at("cursor").get<int>();
    state.phase = phase_from_json(j.at("phase"));
    for (const auto& snap : j.at("snapshots")) {
      state.snapshots.emplace(snap.at("scene").get<int>(), SceneSnapshot{kg::graph_from_json(snap.at("graph")),
                                                                           context_from_json(snap.at("context"))});
    }
    state.next_entry_id = j.at("next_entry_id").get<std::uint64_t>();
    return state;
  } catch (const json::exception& err) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed pipeline state: ") + err.what());
  }
}

std::string state_hash(const PipelineState& state) { return detail::hex64(detail::fnv1a64(to_json(state).dump())); }

std::string export_text(const PipelineState& state) {
  std::string out;
  if (!state.spec.title.empty()) out.append("# ").append(state.spec.title).append("\n\n");
  for (const auto& scene : state.scenes) {
    out.append("## Scene ").append(std::to_string(scene.index)).append("\n\n");
    out.append(scene.text).append("\n\n");
  }
  return out;
}

std::string_view to_string(SceneSubgraph::Source source) noexcept {
  switch (source) {
    case SceneSubgraph::Source::FullGraph:
      return "full_graph";
    case SceneSubgraph::Source::GeneratorQuery:
      return "generator_query";
    case SceneSubgraph::Source::LexicalFallback:
      return "lexical_fallback";
    case SceneSubgraph::Source::Disabled:
      return "disabled";
  }
  return "full_graph";
}

}  // namespace storykg::pipeline
