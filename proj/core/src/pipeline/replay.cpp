#include "storykg/pipeline/replay.hpp"

#include "storykg/error.hpp"
#include "storykg/kg/json.hpp"
#include "storykg/pipeline/event_log.hpp"
#include "storykg/pipeline/pipeline.hpp"
#include "storykg/textgen/backend.hpp"

namespace storykg::pipeline {

using nlohmann::json;

namespace {

textgen::ScriptedResponse recorded_response(const json& rec) {
  if (rec.contains("error")) {
    ErrorCode code = ErrorCode::BackendUnavailable;
    parse_error_code(rec["error"].value("code", ""), code);
    return textgen::ScriptedFailure{code, rec["error"].value("message", "")};
  }
  return rec.value("output", "");
}

const json* find_kind(const std::vector<json>& group, std::string_view kind) {
  for (const auto& rec : group) {
    if (rec["kind"] == kind) return &rec;
  }
  return nullptr;
}

// Compares the records produced by re-execution with the recorded ones.
void compare_group(const std::vector<json>& recorded, const std::vector<json>& produced, std::size_t op_index,
                   std::vector<std::string>& mismatches) {
  auto where = "operation " + std::to_string(op_index) + " (seq " + std::to_string(recorded.front()["seq"].get<std::uint64_t>()) + ")";
  if (recorded.size() != produced.size()) {
    mismatches.push_back(where + ": recorded " + std::to_string(recorded.size()) + " records, replay produced " +
                         std::to_string(produced.size()));
    return;
  }
  for (std::size_t i = 0; i < recorded.size(); ++i) {
    const auto& a = recorded[i];
    const auto& b = produced[i];
    if (a["kind"] != b["kind"]) {
      mismatches.push_back(where + ": record kind differs at seq " + std::to_string(a["seq"].get<std::uint64_t>()));
      return;
    }
    if (a["kind"] == "GeneratorCall") {
      if (a.value("template_id", "") != b.value("template_id", "")) {
        mismatches.push_back(where + ": template differs at seq " + std::to_string(a["seq"].get<std::uint64_t>()));
      } else if (a.value("prompt_hash", "") != b.value("prompt_hash", "")) {
        mismatches.push_back(where + ": prompt differs at seq " + std::to_string(a["seq"].get<std::uint64_t>()));
      }
    } else if (a["kind"] == "SceneGenerated" || a["kind"] == "Regenerated") {
      if (a.value("text", "") != b.value("text", "")) {
        mismatches.push_back(where + ": scene text differs at seq " + std::to_string(a["seq"].get<std::uint64_t>()));
      }
    }
  }
}

}  // namespace

ReplayReport replay(const std::vector<json>& records, std::shared_ptr<const textgen::TemplateSet> templates) {
  ReplayReport report;
  std::optional<PipelineState> state;
  std::vector<json> group;
  std::size_t op_index = 0;

  for (const auto& rec : records) {
    group.push_back(rec);
    if (!rec["commit"].get<bool>()) continue;
    report.next_seq = rec["seq"].get<std::uint64_t>() + 1;

    auto op = parse_op_kind(rec["op"].get<std::string>());
    const auto stored = rec["state_hash"].get<std::string>();
    report.stored_hash = stored;

    std::vector<textgen::ScriptedResponse> outputs;
    for (const auto& r : group) {
      if (r["kind"] == "GeneratorCall") outputs.push_back(recorded_response(r));
    }
    auto backend = std::make_shared<textgen::ScriptedBackend>(std::move(outputs));
    Pipeline pipeline(templates, backend);
    OpLog produced;

    try {
      switch (*op) {
        case OpKind::Create: {
          const auto* created = find_kind(group, "SpecCreated");
          if (!created) throw CorruptLogError(rec["seq"].get<std::size_t>(), "create without SpecCreated");
          state = pipeline.create(spec_from_json((*created)["spec"]));
          produced.records = group;  // nothing to re-derive
          break;
        }
        case OpKind::Initialize:
          state = pipeline.initialize(std::move(*state), &produced);
          break;
        case OpKind::Step:
          state = pipeline.step(std::move(*state), &produced);
          break;
        case OpKind::Edit: {
          const auto* applied = find_kind(group, "EditApplied");
          if (!applied) throw CorruptLogError(rec["seq"].get<std::size_t>(), "edit without EditApplied");
          state = pipeline.submit_edits(std::move(*state), kg::edit_set_from_json((*applied)["edits"]), &produced);
          break;
        }
        case OpKind::Regenerate:
          state = pipeline.regenerate_current(std::move(*state), &produced);
          break;
        case OpKind::Advance:
          state = pipeline.advance(std::move(*state), &produced);
          break;
      }
    } catch (const CorruptLogError&) {
      throw;
    } catch (const Error& err) {
      report.match = false;
      report.mismatches.push_back("operation " + std::to_string(op_index) + " (" + std::string(to_string(*op)) +
                                  ") failed on replay: " + err.what());
      break;
    }

    compare_group(group, produced.records, op_index, report.mismatches);
    if (backend->remaining() != 0) {
      report.mismatches.push_back("operation " + std::to_string(op_index) + ": " +
                                  std::to_string(backend->remaining()) + " recorded outputs left unused");
    }
    if (state_hash(*state) != stored) {
      report.mismatches.push_back("operation " + std::to_string(op_index) + " (" + std::string(to_string(*op)) +
                                  "): state hash " + state_hash(*state) + " != recorded " + stored);
    }
    ++report.committed_ops;
    ++op_index;
    group.clear();
  }

  report.ignored_records = group.size();
  if (state) report.final_hash = state_hash(*state);
  report.state = std::move(state);
  report.match = report.mismatches.empty();
  return report;
}

}  // namespace storykg::pipeline
