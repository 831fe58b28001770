#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "storykg/kg/grammar.hpp"
#include "storykg/kg/types.hpp"

namespace storykg::pipeline {

inline constexpr int kDefaultSceneCount = 5;
inline constexpr std::size_t kDefaultQueryCap = 40;

// World settings plus run parameters for one story.
struct StorySpec {
  std::string title;
  std::string genre;
  std::string protagonists;
  std::string description;
  std::vector<kg::NodeType> type_set = kg::default_type_set();
  int scene_count = kDefaultSceneCount;
  std::size_t query_cap = kDefaultQueryCap;
  bool kg_enabled = true;
  bool edit_mode = false;
  bool llm_cleanup = false;

  friend bool operator==(const StorySpec&, const StorySpec&) = default;
};

// Throws Error(InvalidSpec).
void validate(const StorySpec& spec);

nlohmann::json to_json(const StorySpec& spec);
// Missing optional keys take their defaults. Throws Error(InvalidSpec).
StorySpec spec_from_json(const nlohmann::json& j);

// The story prompt without the run switches (kg_enabled, edit_mode,
// llm_cleanup). Both arms of an ablation must produce the same value.
nlohmann::json story_prompt_json(const StorySpec& spec);

struct Scene {
  int index = 0;  // 1-based
  std::string text;
  int generation = 0;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct ContextSummary {
  std::string text;
  // (scene index, generation) pairs folded into `text`, indices increasing.
  std::vector<std::pair<int, int>> basis;

  bool empty() const noexcept { return basis.empty(); }
  friend bool operator==(const ContextSummary&, const ContextSummary&) = default;
};

struct Phase {
  enum class Kind { Initializing, Generating, AwaitingEdit, Finished };

  Kind kind = Kind::Initializing;
  int scene = 0;

  static Phase initializing() { return {}; }
  static Phase generating(int i) { return {Kind::Generating, i}; }
  static Phase awaiting_edit(int i) { return {Kind::AwaitingEdit, i}; }
  static Phase finished() { return {Kind::Finished, 0}; }

  friend bool operator==(const Phase&, const Phase&) = default;
};

// "Initializing", "Generating(2)", "AwaitingEdit(3)", "Finished"
std::string to_string(const Phase& phase);

struct SceneSnapshot {
  kg::KnowledgeGraph graph;
  ContextSummary context;

  friend bool operator==(const SceneSnapshot&, const SceneSnapshot&) = default;
};

struct PipelineState {
  StorySpec spec;
  kg::NodeRegistry registry;
  kg::KnowledgeGraph graph;
  ContextSummary context;
  std::vector<Scene> scenes;
  int cursor = 0;
  Phase phase;
  std::map<int, SceneSnapshot> snapshots;  // captured when scene i starts
  std::uint64_t next_entry_id = 1;

  friend bool operator==(const PipelineState&, const PipelineState&) = default;
};

nlohmann::json to_json(const PipelineState& state);
PipelineState state_from_json(const nlohmann::json& j);

// Hex digest of the canonical JSON serialization.
std::string state_hash(const PipelineState& state);

// Plain-text story export with "## Scene i" headers.
std::string export_text(const PipelineState& state);

struct SceneSubgraph {
  enum class Source { FullGraph, GeneratorQuery, LexicalFallback, Disabled };

  std::vector<kg::KGEntry> entries;
  Source source = Source::FullGraph;
  std::vector<kg::LineDiagnostic> diagnostics;
};

std::string_view to_string(SceneSubgraph::Source source) noexcept;

}  // namespace storykg::pipeline
