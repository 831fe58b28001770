#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <vector>

#include "storykg/kg/edit.hpp"
#include "storykg/pipeline/state.hpp"
#include "storykg/textgen/backend.hpp"
#include "storykg/textgen/prompt.hpp"

namespace storykg::pipeline {

inline constexpr std::size_t kSummaryFallbackChars = 500;

// Records emitted while one operation runs. The caller decides whether to
// persist them (they are only meaningful if the operation succeeds).
struct OpLog {
  std::vector<nlohmann::json> records;
};

// The story generation state machine:
//
//   create -> initialize -> step (-> submit_edits* / regenerate_current*)
//          -> advance ... -> Finished
//
// Each top-level operation takes a state by value and returns the successor;
// on any fatal error it throws and the caller's state is untouched. Generator
// calls are strictly sequential.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<const textgen::TemplateSet> templates, std::shared_ptr<textgen::GeneratorBackend> backend);

  // Validated spec in phase Initializing. Throws InvalidSpec.
  PipelineState create(const StorySpec& spec) const;

  // Node and graph extraction (when the graph is enabled), then cleanup.
  // Leaves the state in Generating(1).
  PipelineState initialize(PipelineState state, OpLog* log = nullptr) const;

  // One scene: query, generate, summarize, update nodes, update graph per
  // type, cleanup. Ends in AwaitingEdit(i) with edit mode on, otherwise in
  // Generating(i+1) or Finished.
  PipelineState step(PipelineState state, OpLog* log = nullptr) const;

  PipelineState submit_edits(PipelineState state, const kg::EditSet& edits, OpLog* log = nullptr) const;
  PipelineState regenerate_current(PipelineState state, OpLog* log = nullptr) const;
  PipelineState advance(PipelineState state, OpLog* log = nullptr) const;

  // create + initialize + step until Finished, with edit mode forced off.
  PipelineState run(StorySpec spec, OpLog* log = nullptr) const;

  // Sub-steps, exposed for callers that drive the stages individually.
  kg::NodeRegistry initialize_nodes(const StorySpec& spec, OpLog* log = nullptr) const;
  std::vector<kg::KGEntry> extract_kg(PipelineState& state, const kg::NodeType& type, OpLog* log = nullptr) const;
  SceneSubgraph query_subgraph(const PipelineState& state, OpLog* log = nullptr) const;
  Scene generate_scene(const PipelineState& state, const SceneSubgraph& subgraph, OpLog* log = nullptr) const;
  ContextSummary summarize(const PipelineState& state, const Scene& scene, OpLog* log = nullptr) const;
  kg::NodeRegistry update_nodes(const PipelineState& state, const Scene& scene, OpLog* log = nullptr) const;
  std::vector<kg::KGEntry> update_kg(PipelineState& state, const kg::NodeType& type, const Scene& scene,
                                     OpLog* log = nullptr) const;
  // Dedup plus the optional generator pass; records CleanupRan.
  void cleanup(PipelineState& state, const Scene* scene, OpLog* log = nullptr) const;

  const textgen::TemplateSet& templates() const noexcept { return *templates_; }

 private:
  textgen::GenerationResult call(textgen::TemplateId id, textgen::Bindings bindings, OpLog* log) const;
  std::string generate_prose(textgen::TemplateId id, textgen::Bindings bindings, OpLog* log) const;
  void finish_scene(PipelineState& state, const Scene& scene, OpLog* log) const;
  void enter_next_scene(PipelineState& state) const;

  std::shared_ptr<const textgen::TemplateSet> templates_;
  std::shared_ptr<textgen::GeneratorBackend> backend_;
};

}  // namespace storykg::pipeline
