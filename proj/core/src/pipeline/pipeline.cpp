#include "storykg/pipeline/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

#include "storykg/error.hpp"
#include "storykg/kg/cleanup.hpp"
#include "storykg/kg/grammar.hpp"
#include "storykg/kg/json.hpp"
#include "storykg/pipeline/node_lines.hpp"
#include "strings.hpp"

namespace storykg::pipeline {

using textgen::Bindings;
using textgen::TemplateId;
using nlohmann::json;

namespace {

constexpr std::string_view kNoGraph = "(none)";
constexpr std::string_view kNoContext = "(nothing yet)";
constexpr std::string_view kFirstScene = "(this is the first scene)";

bool is_backend_failure(const Error& err) {
  auto c = err.code();
  return c == ErrorCode::BackendUnavailable || c == ErrorCode::BackendRejected || c == ErrorCode::Timeout;
}

[[noreturn]] void wrong_phase(const PipelineState& state, std::string_view op) {
  throw Error(ErrorCode::WrongPhase, std::string(op) + " is not allowed in phase " + to_string(state.phase));
}

void add_world(Bindings& b, const StorySpec& spec) {
  b["title"] = spec.title;
  b["genre"] = spec.genre;
  b["protagonists"] = spec.protagonists;
  b["description"] = spec.description;
}

std::string type_list(const std::vector<kg::NodeType>& types) {
  std::string out;
  for (const auto& t : types) {
    if (!out.empty()) out.append(", ");
    out.append(t.name());
  }
  return out;
}

std::string context_text(const ContextSummary& c) { return c.empty() ? std::string(kNoContext) : c.text; }

std::string graph_text(const std::vector<kg::KGEntry>& entries) {
  return entries.empty() ? std::string(kNoGraph) + "\n" : kg::serialize_entries(entries);
}

void attach_diagnostics(OpLog* log, const std::vector<kg::LineDiagnostic>& diagnostics) {
  if (!log || log->records.empty() || diagnostics.empty()) return;
  json list = json::array();
  for (const auto& d : diagnostics) {
    list.push_back(json{{"line", d.line_number}, {"offset", d.offset}, {"text", d.line}, {"reason", d.reason}});
  }
  log->records.back()["diagnostics"] = std::move(list);
}

void record(OpLog* log, json j) {
  if (log) log->records.push_back(std::move(j));
}

json ids_of(const std::vector<kg::KGEntry>& entries) {
  json ids = json::array();
  for (const auto& e : entries) ids.push_back(e.id);
  return ids;
}

// Maps generator lines back onto existing entries by normalized triple; the
// generator never contributes new facts here.
std::vector<kg::KGEntry> match_back(const kg::KnowledgeGraph& graph, std::string_view text,
                                    std::vector<kg::LineDiagnostic>& diagnostics) {
  auto all = graph.entries();
  std::set<std::string> matched;
  kg::IdMinter scratch;
  const kg::NodeType placeholder("match");
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = detail::trim(lines[i]);
    if (line.empty() || line.substr(0, 2) == "##") continue;
    auto parsed = kg::parse_graph_block(line, placeholder, kg::ParseMode::Lenient, scratch);
    if (parsed.entries.empty()) {
      auto reason = parsed.diagnostics.empty() ? std::string("unparseable") : parsed.diagnostics.front().reason;
      diagnostics.push_back({i + 1, 0, std::string(lines[i]), reason});
      continue;
    }
    auto key = kg::normalize_triple(parsed.entries.front());
    auto it = std::find_if(all.begin(), all.end(), [&](const kg::KGEntry& e) { return kg::normalize_triple(e) == key; });
    if (it == all.end()) {
      diagnostics.push_back({i + 1, 0, std::string(lines[i]), "not an existing graph entry"});
      continue;
    }
    matched.insert(it->id);
  }
  std::vector<kg::KGEntry> out;
  for (auto& e : all) {
    if (matched.count(e.id)) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Pipeline::Pipeline(std::shared_ptr<const textgen::TemplateSet> templates,
                   std::shared_ptr<textgen::GeneratorBackend> backend)
    : templates_(std::move(templates)), backend_(std::move(backend)) {
  if (!templates_) throw Error(ErrorCode::InvalidArgument, "pipeline needs a template set");
  if (!backend_) throw Error(ErrorCode::InvalidArgument, "pipeline needs a generator backend");
}

textgen::GenerationResult Pipeline::call(TemplateId id, Bindings bindings, OpLog* log) const {
  auto request = templates_->make_request(id, std::move(bindings));
  json rec{{"kind", "GeneratorCall"},
           {"template_id", textgen::to_string(id)},
           {"prompt_hash", detail::hex64(detail::fnv1a64(request.prompt))}};
  try {
    auto result = textgen::complete(*backend_, request);
    rec["usage"] = json{{"prompt_tokens", result.usage.prompt_tokens}, {"output_tokens", result.usage.output_tokens}};
    rec["output"] = result.text;
    record(log, std::move(rec));
    return result;
  } catch (const Error& err) {
    rec["error"] = json{{"code", storykg::to_string(err.code())}, {"message", err.what()}};
    record(log, std::move(rec));
    throw;
  }
}

std::string Pipeline::generate_prose(TemplateId id, Bindings bindings, OpLog* log) const {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto text = std::string(detail::trim(call(id, bindings, log).text));
      if (!text.empty()) return text;
      spdlog::warn("{} returned blank output (attempt {})", textgen::to_string(id), attempt + 1);
    } catch (const Error& err) {
      if (!is_backend_failure(err) || attempt == 1) throw;
      spdlog::warn("{} failed: {}; retrying once", textgen::to_string(id), err.what());
    }
  }
  throw Error(ErrorCode::EmptyScene, std::string(textgen::to_string(id)) + " produced an empty scene twice");
}

PipelineState Pipeline::create(const StorySpec& spec) const {
  validate(spec);
  PipelineState state;
  state.spec = spec;
  if (spec.kg_enabled) {
    state.registry = kg::NodeRegistry(spec.type_set);
    state.graph = kg::KnowledgeGraph(spec.type_set);
  }
  state.phase = Phase::initializing();
  return state;
}

kg::NodeRegistry Pipeline::initialize_nodes(const StorySpec& spec, OpLog* log) const {
  kg::NodeRegistry registry(spec.type_set);
  for (int attempt = 0; attempt < 2; ++attempt) {
    Bindings b;
    add_world(b, spec);
    b["types"] = type_list(spec.type_set);
    auto result = call(TemplateId::InitializeNodes, std::move(b), log);
    auto parsed = parse_node_lines(result.text, spec.type_set);
    attach_diagnostics(log, parsed.diagnostics);
    for (auto& node : parsed.nodes) registry.upsert(std::move(node));
    if (!registry.empty()) return registry;
  }
  throw Error(ErrorCode::ExtractionEmpty, "no parseable nodes after one retry");
}

std::vector<kg::KGEntry> Pipeline::extract_kg(PipelineState& state, const kg::NodeType& type, OpLog* log) const {
  Bindings b;
  add_world(b, state.spec);
  b["type"] = type.name();
  b["types"] = type_list(state.spec.type_set);
  b["nodes"] = serialize_nodes(state.registry);
  auto result = call(TemplateId::ExtractKG, std::move(b), log);
  kg::IdMinter ids(state.next_entry_id);
  auto parsed = kg::parse_graph_block(result.text, type, kg::ParseMode::Lenient, ids);
  state.next_entry_id = ids.peek();
  attach_diagnostics(log, parsed.diagnostics);
  return std::move(parsed.entries);
}

void Pipeline::cleanup(PipelineState& state, const Scene* scene, OpLog* log) const {
  auto deduped = kg::dedup_cleanup(state.graph);
  state.graph = std::move(deduped.graph);
  auto removed = ids_of(deduped.removed);

  if (state.spec.llm_cleanup && !state.graph.empty()) {
    Bindings b;
    add_world(b, state.spec);
    b["graph"] = kg::serialize_graph(state.graph);
    b["context"] = context_text(state.context);
    b["scene"] = scene ? scene->text : std::string(kFirstScene);
    try {
      auto result = call(TemplateId::CleanUpLLM, std::move(b), log);
      std::vector<kg::LineDiagnostic> diagnostics;
      auto keep = match_back(state.graph, result.text, diagnostics);
      attach_diagnostics(log, diagnostics);
      if (!keep.empty()) {
        std::set<std::string> keep_ids;
        for (const auto& e : keep) keep_ids.insert(e.id);
        for (const auto& e : state.graph.entries()) {
          // User edits are only ever removed by the user.
          if (keep_ids.count(e.id) || e.provenance.kind == kg::Provenance::Kind::UserEdit) continue;
          state.graph.remove(e.id);
          removed.push_back(e.id);
        }
      }
    } catch (const Error& err) {
      if (!is_backend_failure(err)) throw;
      spdlog::warn("generator cleanup failed, keeping deduplicated graph: {}", err.what());
    }
  }
  record(log, json{{"kind", "CleanupRan"}, {"removed", std::move(removed)}, {"size", state.graph.size()}});
}

PipelineState Pipeline::initialize(PipelineState state, OpLog* log) const {
  if (state.phase.kind != Phase::Kind::Initializing) wrong_phase(state, "initialize");
  if (state.spec.kg_enabled) {
    state.registry = initialize_nodes(state.spec, log);
    state.graph = kg::KnowledgeGraph(state.spec.type_set);
    for (const auto& type : state.spec.type_set) {
      for (auto& e : extract_kg(state, type, log)) state.graph.append(std::move(e));
    }
    cleanup(state, nullptr, log);
  } else {
    record(log, json{{"kind", "CleanupRan"}, {"removed", json::array()}, {"size", 0}});
  }
  state.scenes.clear();
  state.context = {};
  state.snapshots.clear();
  state.cursor = 1;
  state.phase = Phase::generating(1);
  state.snapshots[1] = SceneSnapshot{state.graph, state.context};
  return state;
}

SceneSubgraph Pipeline::query_subgraph(const PipelineState& state, OpLog* log) const {
  SceneSubgraph out;
  if (!state.spec.kg_enabled) {
    out.source = SceneSubgraph::Source::Disabled;
    return out;
  }
  const int i = state.cursor;
  if (i <= 1) {
    out.entries = state.graph.entries();
    out.source = SceneSubgraph::Source::FullGraph;
    return out;
  }
  const auto& previous = state.scenes.at(static_cast<std::size_t>(i - 2)).text;
  try {
    Bindings b;
    add_world(b, state.spec);
    b["graph"] = kg::serialize_graph(state.graph);
    b["context"] = context_text(state.context);
    b["previous_scene"] = previous;
    b["cap"] = std::to_string(state.spec.query_cap);
    b["scene_number"] = std::to_string(i);
    b["scene_count"] = std::to_string(state.spec.scene_count);
    auto result = call(TemplateId::Query, std::move(b), log);
    out.entries = match_back(state.graph, result.text, out.diagnostics);
    attach_diagnostics(log, out.diagnostics);
    if (out.entries.size() > state.spec.query_cap) out.entries.resize(state.spec.query_cap);
    out.source = SceneSubgraph::Source::GeneratorQuery;
  } catch (const Error& err) {
    if (!is_backend_failure(err)) throw;
    spdlog::warn("scene {} query failed, using lexical selection: {}", i, err.what());
    out.entries.clear();
  }
  if (out.entries.empty()) {
    out.entries = kg::lexical_subgraph(state.graph, state.context.text, previous, state.spec.query_cap);
    out.source = SceneSubgraph::Source::LexicalFallback;
  }
  return out;
}

Scene Pipeline::generate_scene(const PipelineState& state, const SceneSubgraph& subgraph, OpLog* log) const {
  const int i = state.cursor;
  Bindings b;
  add_world(b, state.spec);
  b["graph"] = graph_text(subgraph.entries);
  b["context"] = context_text(state.context);
  b["previous_scene"] = i > 1 ? state.scenes.at(static_cast<std::size_t>(i - 2)).text : std::string(kFirstScene);
  b["scene_number"] = std::to_string(i);
  b["scene_count"] = std::to_string(state.spec.scene_count);
  return Scene{i, generate_prose(TemplateId::GenerateScene, std::move(b), log), 0};
}

ContextSummary Pipeline::summarize(const PipelineState& state, const Scene& scene, OpLog* log) const {
  ContextSummary next;
  next.basis = state.context.basis;
  next.basis.emplace_back(scene.index, scene.generation);
  try {
    Bindings b;
    add_world(b, state.spec);
    b["context"] = context_text(state.context);
    b["scene"] = scene.text;
    b["scene_number"] = std::to_string(scene.index);
    b["scene_count"] = std::to_string(state.spec.scene_count);
    auto text = std::string(detail::trim(call(TemplateId::Summarize, std::move(b), log).text));
    if (!text.empty()) {
      next.text = std::move(text);
      return next;
    }
    spdlog::warn("summary for scene {} was blank, using truncation fallback", scene.index);
  } catch (const Error& err) {
    if (!is_backend_failure(err)) throw;
    spdlog::warn("summary for scene {} failed, using truncation fallback: {}", scene.index, err.what());
  }
  next.text = state.context.text;
  if (!next.text.empty()) next.text.push_back('\n');
  next.text.append(detail::utf8_prefix(scene.text, kSummaryFallbackChars));
  return next;
}

kg::NodeRegistry Pipeline::update_nodes(const PipelineState& state, const Scene& scene, OpLog* log) const {
  kg::NodeRegistry registry = state.registry;
  try {
    Bindings b;
    add_world(b, state.spec);
    b["nodes"] = serialize_nodes(state.registry);
    b["types"] = type_list(state.spec.type_set);
    b["scene"] = scene.text;
    b["scene_number"] = std::to_string(scene.index);
    auto result = call(TemplateId::UpdateNodes, std::move(b), log);
    auto parsed = parse_node_lines(result.text, state.spec.type_set);
    attach_diagnostics(log, parsed.diagnostics);
    for (auto& node : parsed.nodes) registry.upsert(std::move(node));
  } catch (const Error& err) {
    if (!is_backend_failure(err)) throw;
    spdlog::warn("node update for scene {} failed, registry unchanged: {}", scene.index, err.what());
  }
  return registry;
}

std::vector<kg::KGEntry> Pipeline::update_kg(PipelineState& state, const kg::NodeType& type, const Scene& scene,
                                             OpLog* log) const {
  try {
    Bindings b;
    add_world(b, state.spec);
    b["graph"] = kg::serialize_graph(state.graph);
    b["type"] = type.name();
    b["nodes"] = serialize_nodes(state.registry);
    b["scene"] = scene.text;
    b["scene_number"] = std::to_string(scene.index);
    auto result = call(TemplateId::UpdateKG, std::move(b), log);
    kg::IdMinter ids(state.next_entry_id);
    auto parsed = kg::parse_graph_block(result.text, type, kg::ParseMode::Lenient, ids);
    state.next_entry_id = ids.peek();
    attach_diagnostics(log, parsed.diagnostics);
    for (auto& e : parsed.entries) e.provenance = kg::Provenance::from_scene(scene.index);
    return std::move(parsed.entries);
  } catch (const Error& err) {
    if (!is_backend_failure(err)) throw;
    spdlog::warn("graph update ({}) for scene {} failed, partition unchanged: {}", type.name(), scene.index, err.what());
    return {};
  }
}

void Pipeline::finish_scene(PipelineState& state, const Scene& scene, OpLog* log) const {
  state.context = summarize(state, scene, log);
  if (!state.spec.kg_enabled) return;
  state.registry = update_nodes(state, scene, log);
  // Additions are merged only after every type has been asked, so each
  // UpdateKG call sees the graph as it stood before this scene.
  std::vector<kg::KGEntry> additions;
  for (const auto& type : state.spec.type_set) {
    auto entries = update_kg(state, type, scene, log);
    additions.insert(additions.end(), std::make_move_iterator(entries.begin()), std::make_move_iterator(entries.end()));
  }
  for (auto& e : additions) state.graph.append(std::move(e));
  cleanup(state, &scene, log);
}

void Pipeline::enter_next_scene(PipelineState& state) const {
  const int i = state.cursor;
  if (i >= state.spec.scene_count) {
    state.phase = Phase::finished();
    return;
  }
  state.cursor = i + 1;
  state.phase = Phase::generating(i + 1);
  state.snapshots[i + 1] = SceneSnapshot{state.graph, state.context};
}

PipelineState Pipeline::step(PipelineState state, OpLog* log) const {
  if (state.phase.kind != Phase::Kind::Generating) wrong_phase(state, "step");
  const int i = state.phase.scene;
  state.cursor = i;
  auto subgraph = query_subgraph(state, log);
  auto scene = generate_scene(state, subgraph, log);
  state.scenes.resize(static_cast<std::size_t>(i - 1));
  state.scenes.push_back(scene);
  record(log, json{{"kind", "SceneGenerated"},
                   {"index", scene.index},
                   {"generation", scene.generation},
                   {"text", scene.text},
                   {"subgraph", json{{"source", to_string(subgraph.source)}, {"ids", ids_of(subgraph.entries)}}}});
  finish_scene(state, scene, log);
  if (state.spec.edit_mode) {
    state.phase = Phase::awaiting_edit(i);
  } else {
    enter_next_scene(state);
  }
  return state;
}

PipelineState Pipeline::submit_edits(PipelineState state, const kg::EditSet& edits, OpLog* log) const {
  if (state.phase.kind != Phase::Kind::AwaitingEdit) wrong_phase(state, "submit_edits");
  if (!state.spec.kg_enabled) throw Error(ErrorCode::WrongPhase, "the knowledge graph is disabled for this story");
  kg::IdMinter ids(state.next_entry_id);
  state.graph = kg::apply_edits(state.graph, edits, &ids);
  state.next_entry_id = ids.peek();
  record(log, json{{"kind", "EditApplied"}, {"edits", kg::to_json(edits)}, {"size", state.graph.size()}});
  return state;
}

PipelineState Pipeline::regenerate_current(PipelineState state, OpLog* log) const {
  if (state.phase.kind != Phase::Kind::AwaitingEdit) wrong_phase(state, "regenerate");
  const int i = state.phase.scene;
  state.cursor = i;
  // Scene i's own contribution must not be summarized twice.
  state.context = state.snapshots.at(i).context;

  auto subgraph = query_subgraph(state, log);
  const auto& old_scene = state.scenes.at(static_cast<std::size_t>(i - 1));
  Bindings b;
  add_world(b, state.spec);
  b["graph"] = graph_text(subgraph.entries);
  b["context"] = context_text(state.context);
  b["previous_scene"] = i > 1 ? state.scenes.at(static_cast<std::size_t>(i - 2)).text : std::string(kFirstScene);
  b["current_scene"] = old_scene.text;
  b["scene_number"] = std::to_string(i);
  b["scene_count"] = std::to_string(state.spec.scene_count);
  Scene scene{i, generate_prose(TemplateId::Regenerate, std::move(b), log), old_scene.generation + 1};
  state.scenes[static_cast<std::size_t>(i - 1)] = scene;
  record(log, json{{"kind", "Regenerated"},
                   {"index", scene.index},
                   {"generation", scene.generation},
                   {"text", scene.text},
                   {"subgraph", json{{"source", to_string(subgraph.source)}, {"ids", ids_of(subgraph.entries)}}}});
  finish_scene(state, scene, log);
  return state;
}

PipelineState Pipeline::advance(PipelineState state, OpLog* log) const {
  if (state.phase.kind != Phase::Kind::AwaitingEdit) wrong_phase(state, "advance");
  const int i = state.phase.scene;
  state.cursor = i;
  if (state.spec.kg_enabled) cleanup(state, &state.scenes.at(static_cast<std::size_t>(i - 1)), log);
  enter_next_scene(state);
  record(log, json{{"kind", "Advanced"}, {"from", i}, {"phase", to_string(state.phase)}});
  return state;
}

PipelineState Pipeline::run(StorySpec spec, OpLog* log) const {
  spec.edit_mode = false;
  auto state = initialize(create(spec), log);
  while (state.phase.kind == Phase::Kind::Generating) state = step(std::move(state), log);
  return state;
}

}  // namespace storykg::pipeline
