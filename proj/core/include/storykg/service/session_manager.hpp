#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "storykg/kg/edit.hpp"
#include "storykg/pipeline/event_log.hpp"
#include "storykg/pipeline/pipeline.hpp"
#include "storykg/service/config.hpp"

namespace storykg::service {

using Clock = std::chrono::system_clock;

struct JobError {
  ErrorCode code;
  std::string message;
};

// What a reader sees: an immutable state plus session bookkeeping.
struct SessionView {
  std::string id;
  std::shared_ptr<const pipeline::PipelineState> state;
  bool busy = false;
  std::optional<JobError> last_error;  // from the most recent background job
  std::uint64_t version = 0;           // bumps on every observable change
  Clock::time_point created_at;
  Clock::time_point updated_at;
};

nlohmann::json projection(const SessionView& view);

// Owns every session: a directory per session holding events.jsonl (the
// append-only log) and snapshot.json (the latest committed state, written
// atomically). Each session runs at most one mutation at a time; a second
// request while one is in flight fails with Busy. Long operations run on a
// background thread and their progress is observable through get/wait.
class SessionManager {
 public:
  SessionManager(std::filesystem::path dir, std::shared_ptr<const textgen::TemplateSet> templates,
                 std::shared_ptr<textgen::GeneratorBackend> backend, StoryDefaults defaults = {});
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  // Rebuilds sessions found on disk by replaying their logs. Torn or
  // unfinished trailing records are cut off. Returns the number loaded.
  std::size_t recover();

  // Fills missing spec keys from the defaults, validates, persists, and
  // starts initialization plus the first scene in the background.
  std::string create(const nlohmann::json& spec_json);
  std::string create(pipeline::StorySpec spec);

  SessionView get(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Synchronous; requires AwaitingEdit.
  SessionView submit_edits(const std::string& id, const kg::EditSet& edits);

  // Background jobs. Phase and Busy are checked before returning.
  void regenerate(const std::string& id);
  // In AwaitingEdit: advance then generate the next scene. In Initializing
  // or Generating (after a failed job or a restart): resume generation.
  void advance(const std::string& id);

  // Blocks until the session's version exceeds `seen` or the timeout passes.
  SessionView wait_change(const std::string& id, std::uint64_t seen, std::chrono::milliseconds timeout) const;
  // Blocks until no job is running.
  SessionView wait_idle(const std::string& id, std::chrono::milliseconds timeout = std::chrono::seconds(30)) const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  struct Session;
  enum class Job { Drive, Regenerate, Advance };

  std::shared_ptr<Session> find(const std::string& id) const;
  void start_job(const std::shared_ptr<Session>& s, Job job);
  void run_job(const std::shared_ptr<Session>& s, Job job);
  void commit(Session& s, pipeline::OpKind op, const pipeline::OpLog& log, pipeline::PipelineState next);
  void write_snapshot(const Session& s) const;
  std::string new_id();

  std::filesystem::path dir_;
  std::shared_ptr<const textgen::TemplateSet> templates_;
  std::shared_ptr<textgen::GeneratorBackend> backend_;
  StoryDefaults defaults_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mutex_;
  std::uint64_t id_seed_;
  std::uint64_t id_counter_ = 0;
};

}  // namespace storykg::service
