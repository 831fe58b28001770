#include "storykg/pipeline/event_log.hpp"

#include <sstream>

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::pipeline {

using nlohmann::json;

namespace {

constexpr std::pair<OpKind, std::string_view> kOps[] = {
    {OpKind::Create, "create"},         {OpKind::Initialize, "initialize"}, {OpKind::Step, "step"},
    {OpKind::Edit, "edit"},             {OpKind::Regenerate, "regenerate"}, {OpKind::Advance, "advance"},
};

constexpr std::string_view kKinds[] = {"SpecCreated", "GeneratorCall", "SceneGenerated", "EditApplied",
                                       "Regenerated", "Advanced",      "CleanupRan"};

}  // namespace

std::string_view to_string(OpKind op) noexcept {
  for (const auto& [kind, name] : kOps) {
    if (kind == op) return name;
  }
  return "unknown";
}

std::optional<OpKind> parse_op_kind(std::string_view name) noexcept {
  for (const auto& [kind, n] : kOps) {
    if (n == name) return kind;
  }
  return std::nullopt;
}

EventLogWriter::EventLogWriter(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::StorageFailure, "cannot open event log " + path_.string());
}

void EventLogWriter::append(const json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::StorageFailure, "write to event log " + path_.string() + " failed");
}

void SessionRecorder::record_create(const PipelineState& created) {
  json rec{{"seq", next_seq_},
           {"kind", "SpecCreated"},
           {"op", to_string(OpKind::Create)},
           {"commit", true},
           {"spec", to_json(created.spec)},
           {"state_hash", state_hash(created)}};
  writer_->append(rec);
  ++next_seq_;
}

void SessionRecorder::commit(OpKind op, const OpLog& log, const PipelineState& after) {
  if (log.records.empty()) throw Error(ErrorCode::InvalidArgument, "operation produced no records");
  auto hash = state_hash(after);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    json rec = log.records[i];
    rec["seq"] = next_seq_;
    rec["op"] = to_string(op);
    bool last = i + 1 == log.records.size();
    rec["commit"] = last;
    if (last) rec["state_hash"] = hash;
    writer_->append(rec);
    ++next_seq_;
  }
}

std::vector<json> parse_log(std::string_view text, bool tolerate_torn_tail) {
  std::vector<json> records;
  auto lines = detail::split_lines(text);
  bool terminated = !text.empty() && text.back() == '\n';
  for (std::size_t i = 0; i < lines.size(); ++i) {
    bool last = i + 1 == lines.size();
    auto rec = json::parse(lines[i], nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      if (last && !terminated && tolerate_torn_tail) break;
      throw CorruptLogError(i, "record " + std::to_string(i) + " is not a JSON object");
    }
    auto bad = [&](const std::string& why) { return CorruptLogError(i, "record " + std::to_string(i) + ": " + why); };
    if (!rec.contains("seq") || !rec["seq"].is_number_unsigned() || rec["seq"].get<std::uint64_t>() != i) {
      throw bad("sequence number is missing or out of order");
    }
    if (!rec.contains("kind") || !rec["kind"].is_string() ||
        std::find(std::begin(kKinds), std::end(kKinds), rec["kind"].get<std::string>()) == std::end(kKinds)) {
      throw bad("unknown record kind");
    }
    if (!rec.contains("op") || !rec["op"].is_string() || !parse_op_kind(rec["op"].get<std::string>())) {
      throw bad("unknown operation");
    }
    if (!rec.contains("commit") || !rec["commit"].is_boolean()) throw bad("missing commit flag");
    if (rec["commit"].get<bool>() && (!rec.contains("state_hash") || !rec["state_hash"].is_string())) {
      throw bad("commit record without state_hash");
    }
    if (i == 0 && rec["kind"] != "SpecCreated") throw bad("log must start with SpecCreated");
    if (i > 0 && rec["kind"] == "SpecCreated") throw bad("SpecCreated after the first record");
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<json> read_log(const std::filesystem::path& path, bool tolerate_torn_tail) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read event log " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_log(buf.str(), tolerate_torn_tail);
}

}  // namespace storykg::pipeline
