#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "storykg/pipeline/pipeline.hpp"

namespace storykg::pipeline {

// Session event log: one JSON object per line. Every record carries
//
//   seq     0-based position in the log
//   kind    SpecCreated | GeneratorCall | SceneGenerated | EditApplied |
//           Regenerated | Advanced | CleanupRan
//   op      the operation that produced it
//   commit  true on the last record of an operation
//
// and commit records also carry state_hash, the hash of the state after the
// operation. Records after the last commit belong to an operation that never
// finished and are ignored on replay.
enum class OpKind { Create, Initialize, Step, Edit, Regenerate, Advance };

std::string_view to_string(OpKind op) noexcept;
std::optional<OpKind> parse_op_kind(std::string_view name) noexcept;

// Append-only JSON-lines writer; every append is flushed before returning.
class EventLogWriter {
 public:
  explicit EventLogWriter(std::filesystem::path path);
  virtual ~EventLogWriter() = default;

  EventLogWriter(const EventLogWriter&) = delete;
  EventLogWriter& operator=(const EventLogWriter&) = delete;

  virtual void append(const nlohmann::json& record);

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Frames operation records (seq, op, commit, state_hash) and writes them.
class SessionRecorder {
 public:
  // `next_seq` continues an existing log.
  SessionRecorder(EventLogWriter& writer, std::uint64_t next_seq = 0) : writer_(&writer), next_seq_(next_seq) {}

  void record_create(const PipelineState& created);
  void commit(OpKind op, const OpLog& log, const PipelineState& after);

  std::uint64_t next_seq() const noexcept { return next_seq_; }

 private:
  EventLogWriter* writer_;
  std::uint64_t next_seq_;
};

// Reads and structurally validates a log. Throws CorruptLogError naming the
// first bad record. With `tolerate_torn_tail`, an unterminated, unparseable
// last line is dropped instead.
std::vector<nlohmann::json> read_log(const std::filesystem::path& path, bool tolerate_torn_tail = false);
std::vector<nlohmann::json> parse_log(std::string_view text, bool tolerate_torn_tail = false);

}  // namespace storykg::pipeline
