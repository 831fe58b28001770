#include "storykg/service/session_manager.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <random>
#include <sstream>

#include "storykg/error.hpp"
#include "storykg/kg/json.hpp"
#include "storykg/pipeline/replay.hpp"
#include "strings.hpp"

namespace storykg::service {

using nlohmann::json;
using pipeline::OpKind;
using pipeline::OpLog;
using pipeline::Phase;
using pipeline::PipelineState;

namespace {

constexpr const char* kLogFile = "events.jsonl";
constexpr const char* kSnapshotFile = "snapshot.json";

std::int64_t to_millis(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

Clock::time_point from_millis(std::int64_t ms) { return Clock::time_point(std::chrono::milliseconds(ms)); }

void write_atomically(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot replace " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool in_generation(const Phase& p) {
  return p.kind == Phase::Kind::Initializing || p.kind == Phase::Kind::Generating;
}

}  // namespace

struct SessionManager::Session {
  std::string id;
  std::filesystem::path dir;

  mutable std::mutex m;
  mutable std::condition_variable cv;
  std::shared_ptr<const PipelineState> state;
  bool busy = false;
  std::optional<JobError> last_error;
  std::uint64_t version = 0;
  Clock::time_point created_at;
  Clock::time_point updated_at;
  std::thread worker;

  // Touched only by the current mutation, which `busy` makes exclusive.
  std::unique_ptr<pipeline::EventLogWriter> writer;
  std::unique_ptr<pipeline::SessionRecorder> recorder;

  SessionView view() const {
    return SessionView{id, state, busy, last_error, version, created_at, updated_at};
  }
};

json projection(const SessionView& view) {
  const auto& st = *view.state;
  json scenes = json::array();
  for (const auto& s : st.scenes) scenes.push_back(json{{"index", s.index}, {"text", s.text}, {"generation", s.generation}});
  json basis = json::array();
  for (const auto& [i, g] : st.context.basis) basis.push_back(json::array({i, g}));
  json j{{"id", view.id},
         {"phase", pipeline::to_string(st.phase)},
         {"scene", st.phase.scene},
         {"busy", view.busy},
         {"version", view.version},
         {"spec", pipeline::to_json(st.spec)},
         {"scenes", std::move(scenes)},
         {"graph", kg::to_json(st.graph)},
         {"graph_size", st.graph.size()},
         {"nodes", kg::to_json(st.registry)},
         {"context", json{{"text", st.context.text}, {"basis", std::move(basis)}}},
         {"created_at", to_millis(view.created_at)},
         {"updated_at", to_millis(view.updated_at)}};
  j["last_error"] = view.last_error
                        ? json{{"code", storykg::to_string(view.last_error->code)}, {"message", view.last_error->message}}
                        : json(nullptr);
  return j;
}

SessionManager::SessionManager(std::filesystem::path dir, std::shared_ptr<const textgen::TemplateSet> templates,
                               std::shared_ptr<textgen::GeneratorBackend> backend, StoryDefaults defaults)
    : dir_(std::move(dir)), templates_(std::move(templates)), backend_(std::move(backend)), defaults_(std::move(defaults)) {
  ensure_writable_dir(dir_);
  std::random_device rd;
  id_seed_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

SessionManager::~SessionManager() {
  std::vector<std::thread> workers;
  {
    std::unique_lock lock(sessions_mutex_);
    for (auto& [id, s] : sessions_) {
      std::lock_guard sl(s->m);
      if (s->worker.joinable()) workers.push_back(std::move(s->worker));
    }
  }
  for (auto& w : workers) w.join();
}

std::string SessionManager::new_id() {
  std::lock_guard lock(id_mutex_);
  std::mt19937_64 rng(id_seed_ + id_counter_++);
  for (;;) {
    auto id = "s" + detail::hex64(rng()).substr(0, 12);
    std::shared_lock sl(sessions_mutex_);
    if (!sessions_.count(id) && !std::filesystem::exists(dir_ / id)) return id;
  }
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionManager::ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

void SessionManager::write_snapshot(const Session& s) const {
  PipelineState state;
  json meta;
  {
    std::lock_guard lock(s.m);
    state = *s.state;
    meta = json{{"created_at", to_millis(s.created_at)}, {"updated_at", to_millis(s.updated_at)}};
  }
  meta["seq"] = s.recorder->next_seq() - 1;
  meta["state_hash"] = pipeline::state_hash(state);
  meta["state"] = pipeline::to_json(state);
  try {
    write_atomically(s.dir / kSnapshotFile, meta.dump());
  } catch (const Error& err) {
    spdlog::warn("session {}: snapshot not written: {}", s.id, err.what());
  }
}

void SessionManager::commit(Session& s, OpKind op, const OpLog& log, PipelineState next) {
  s.recorder->commit(op, log, next);
  {
    std::lock_guard lock(s.m);
    s.state = std::make_shared<const PipelineState>(std::move(next));
    s.updated_at = Clock::now();
    ++s.version;
  }
  s.cv.notify_all();
  write_snapshot(s);
}

std::string SessionManager::create(const json& spec_json) {
  if (!spec_json.is_object()) throw Error(ErrorCode::InvalidSpec, "spec must be a JSON object");
  json merged = spec_json;
  if (!merged.contains("scene_count")) merged["scene_count"] = defaults_.scene_count;
  if (!merged.contains("query_cap")) merged["query_cap"] = defaults_.query_cap;
  if (!merged.contains("edit_mode")) merged["edit_mode"] = defaults_.edit_mode;
  if (!merged.contains("type_set")) {
    json types = json::array();
    for (const auto& t : defaults_.type_set) types.push_back(t.name());
    merged["type_set"] = std::move(types);
  }
  return create(pipeline::spec_from_json(merged));
}

std::string SessionManager::create(pipeline::StorySpec spec) {
  pipeline::Pipeline pipe(templates_, backend_);
  auto state = pipe.create(spec);

  auto s = std::make_shared<Session>();
  s->id = new_id();
  s->dir = dir_ / s->id;
  std::error_code ec;
  if (!std::filesystem::create_directories(s->dir, ec)) {
    throw Error(ErrorCode::StorageFailure, "cannot create session directory " + s->dir.string());
  }
  s->writer = std::make_unique<pipeline::EventLogWriter>(s->dir / kLogFile);
  s->recorder = std::make_unique<pipeline::SessionRecorder>(*s->writer);
  s->recorder->record_create(state);
  s->state = std::make_shared<const PipelineState>(std::move(state));
  s->created_at = s->updated_at = Clock::now();
  write_snapshot(*s);

  {
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(s->id, s);
  }
  spdlog::info("session {} created", s->id);
  start_job(s, Job::Drive);
  return s->id;
}

SessionView SessionManager::get(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->m);
  return s->view();
}

SessionView SessionManager::submit_edits(const std::string& id, const kg::EditSet& edits) {
  auto s = find(id);
  std::shared_ptr<const PipelineState> current;
  {
    std::lock_guard lock(s->m);
    if (s->busy) throw Error(ErrorCode::Busy, "session " + id + " is busy");
    if (s->state->phase.kind != Phase::Kind::AwaitingEdit) {
      throw Error(ErrorCode::WrongPhase, "edits are not allowed in phase " + pipeline::to_string(s->state->phase));
    }
    s->busy = true;
    current = s->state;
  }
  auto release = [&] {
    {
      std::lock_guard lock(s->m);
      s->busy = false;
    }
    s->cv.notify_all();
  };
  try {
    pipeline::Pipeline pipe(templates_, backend_);
    OpLog log;
    auto next = pipe.submit_edits(*current, edits, &log);
    commit(*s, OpKind::Edit, log, std::move(next));
  } catch (...) {
    release();
    throw;
  }
  release();
  return get(id);
}

void SessionManager::regenerate(const std::string& id) { start_job(find(id), Job::Regenerate); }

void SessionManager::advance(const std::string& id) { start_job(find(id), Job::Advance); }

void SessionManager::start_job(const std::shared_ptr<Session>& s, Job job) {
  std::thread old;
  {
    std::lock_guard lock(s->m);
    if (s->busy) throw Error(ErrorCode::Busy, "session " + s->id + " is busy");
    const auto& phase = s->state->phase;
    bool ok = false;
    switch (job) {
      case Job::Drive:
        ok = true;
        break;
      case Job::Regenerate:
        ok = phase.kind == Phase::Kind::AwaitingEdit;
        break;
      case Job::Advance:
        ok = phase.kind == Phase::Kind::AwaitingEdit || in_generation(phase);
        break;
    }
    if (!ok) {
      throw Error(ErrorCode::WrongPhase, std::string(job == Job::Regenerate ? "regenerate" : "advance") +
                                             " is not allowed in phase " + pipeline::to_string(phase));
    }
    s->busy = true;
    s->last_error.reset();
    ++s->version;
    old = std::move(s->worker);
    s->worker = std::thread([this, s, job] { run_job(s, job); });
  }
  s->cv.notify_all();
  if (old.joinable()) old.join();
}

void SessionManager::run_job(const std::shared_ptr<Session>& s, Job job) {
  pipeline::Pipeline pipe(templates_, backend_);
  auto current = [&] {
    std::lock_guard lock(s->m);
    return *s->state;
  };
  std::optional<JobError> failure;
  try {
    if (job == Job::Regenerate) {
      OpLog log;
      auto next = pipe.regenerate_current(current(), &log);
      commit(*s, OpKind::Regenerate, log, std::move(next));
    } else {
      auto state = current();
      if (job == Job::Advance && state.phase.kind == Phase::Kind::AwaitingEdit) {
        OpLog log;
        auto next = pipe.advance(std::move(state), &log);
        commit(*s, OpKind::Advance, log, std::move(next));
      }
      for (;;) {
        state = current();
        if (!in_generation(state.phase)) break;
        OpLog log;
        bool init = state.phase.kind == Phase::Kind::Initializing;
        auto next = init ? pipe.initialize(std::move(state), &log) : pipe.step(std::move(state), &log);
        commit(*s, init ? OpKind::Initialize : OpKind::Step, log, std::move(next));
      }
    }
  } catch (const Error& err) {
    failure = JobError{err.code(), err.what()};
  } catch (const std::exception& err) {
    failure = JobError{ErrorCode::StorageFailure, err.what()};
  }
  if (failure) spdlog::warn("session {}: job failed: {}: {}", s->id, storykg::to_string(failure->code), failure->message);
  {
    std::lock_guard lock(s->m);
    s->busy = false;
    s->last_error = failure;
    ++s->version;
  }
  s->cv.notify_all();
}

SessionView SessionManager::wait_change(const std::string& id, std::uint64_t seen,
                                        std::chrono::milliseconds timeout) const {
  auto s = find(id);
  std::unique_lock lock(s->m);
  s->cv.wait_for(lock, timeout, [&] { return s->version > seen; });
  return s->view();
}

SessionView SessionManager::wait_idle(const std::string& id, std::chrono::milliseconds timeout) const {
  auto s = find(id);
  std::unique_lock lock(s->m);
  if (!s->cv.wait_for(lock, timeout, [&] { return !s->busy; })) {
    throw Error(ErrorCode::Timeout, "session " + id + " still busy");
  }
  return s->view();
}

std::size_t SessionManager::recover() {
  std::size_t loaded = 0;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
    if (!entry.is_directory()) continue;
    auto id = entry.path().filename().string();
    auto log_path = entry.path() / kLogFile;
    if (!std::filesystem::exists(log_path)) continue;
    {
      std::shared_lock lock(sessions_mutex_);
      if (sessions_.count(id)) continue;
    }
    try {
      auto text = read_file(log_path);
      auto records = pipeline::parse_log(text, true);
      auto report = pipeline::replay(records, templates_);
      if (!report.state) {
        spdlog::warn("session {}: log holds no committed operation; skipped", id);
        continue;
      }
      if (!report.match) {
        for (const auto& m : report.mismatches) spdlog::warn("session {}: replay mismatch: {}", id, m);
      }

      std::size_t keep = records.size() - report.ignored_records;
      std::string prefix;
      for (std::size_t i = 0; i < keep; ++i) prefix += records[i].dump() + "\n";
      if (prefix != text) {
        spdlog::warn("session {}: dropping {} trailing record(s) of an unfinished operation", id,
                     records.size() - keep);
        write_atomically(log_path, prefix);
      }

      auto s = std::make_shared<Session>();
      s->id = id;
      s->dir = entry.path();
      s->state = std::make_shared<const PipelineState>(std::move(*report.state));
      s->created_at = s->updated_at = Clock::now();
      if (std::filesystem::exists(entry.path() / kSnapshotFile)) {
        auto snap = json::parse(read_file(entry.path() / kSnapshotFile), nullptr, false);
        if (snap.is_object()) {
          s->created_at = from_millis(snap.value("created_at", to_millis(s->created_at)));
          s->updated_at = from_millis(snap.value("updated_at", to_millis(s->updated_at)));
        }
      }
      s->writer = std::make_unique<pipeline::EventLogWriter>(log_path);
      s->recorder = std::make_unique<pipeline::SessionRecorder>(*s->writer, keep);
      write_snapshot(*s);
      {
        std::unique_lock lock(sessions_mutex_);
        sessions_.emplace(id, s);
      }
      ++loaded;
    } catch (const Error& err) {
      spdlog::error("session {}: not recovered: {}", id, err.what());
    }
  }
  return loaded;
}

}  // namespace storykg::service
