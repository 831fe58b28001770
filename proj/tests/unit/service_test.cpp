#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "storykg/error.hpp"
#include "storykg/kg/json.hpp"
#include "storykg/pipeline/event_log.hpp"
#include "storykg/pipeline/replay.hpp"
#include "storykg/service/config.hpp"
#include "storykg/service/http_api.hpp"
#include "storykg/service/session_manager.hpp"
#include "test_support.hpp"

using namespace storykg;
using namespace storykg::service;
using nlohmann::json;
using pipeline::Phase;
using storykg::testing::default_templates;
using storykg::testing::GatedBackend;
using storykg::testing::read_file;
using storykg::testing::small_spec;
using storykg::testing::story_backend;
using storykg::testing::TempDir;
using storykg::testing::write_file;

namespace {

// Fails the first `failures` calls, then delegates.
class FlakyBackend final : public textgen::GeneratorBackend {
 public:
  FlakyBackend(std::shared_ptr<textgen::GeneratorBackend> inner, int failures)
      : inner_(std::move(inner)), failures_(failures) {}
  textgen::GenerationResult complete(const textgen::GenerationRequest& r) override {
    if (failures_-- > 0) throw Error(ErrorCode::BackendUnavailable, "flaky");
    return inner_->complete(r);
  }
  std::string id() const override { return "flaky"; }

 private:
  std::shared_ptr<textgen::GeneratorBackend> inner_;
  std::atomic<int> failures_;
};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::InvalidArgument;
}

kg::EditSet add_edit(const std::string& subject = "Mara", const std::string& object = "Blaster") {
  kg::KGEntry e{"", subject, object, "breaks", "weapon shatters", kg::NodeType("objects"), {}};
  return kg::EditSet{{kg::AddEntry{e}}, kg::EditAuthor::User};
}

json spec_json(int scenes, bool edit) { return pipeline::to_json(small_spec(scenes, true, edit)); }

}  // namespace

TEST(SessionManager, CreateRunsToFirstEditPoint) {
  TempDir dir;
  SessionManager mgr(dir.path(), default_templates(), story_backend());
  auto id = mgr.create(spec_json(2, true));
  EXPECT_EQ(id.size(), 13u);
  auto view = mgr.wait_idle(id);
  EXPECT_FALSE(view.busy);
  EXPECT_FALSE(view.last_error);
  EXPECT_EQ(view.state->phase, Phase::awaiting_edit(1));
  EXPECT_EQ(mgr.ids(), std::vector<std::string>{id});

  auto snap = json::parse(read_file(dir / id / "snapshot.json"));
  EXPECT_EQ(snap["state_hash"], pipeline::state_hash(*view.state));
  auto report = pipeline::replay(pipeline::read_log(dir / id / "events.jsonl"), default_templates());
  EXPECT_TRUE(report.match);
  EXPECT_EQ(report.final_hash, pipeline::state_hash(*view.state));

  auto p = projection(view);
  EXPECT_EQ(p["phase"], "AwaitingEdit(1)");
  EXPECT_EQ(p["scenes"].size(), 1u);
  EXPECT_EQ(p["graph_size"], view.state->graph.size());
  EXPECT_TRUE(p["last_error"].is_null());
}

TEST(SessionManager, DefaultsFillMissingKeys) {
  TempDir dir;
  StoryDefaults defaults;
  defaults.scene_count = 3;
  SessionManager mgr(dir.path(), default_templates(), story_backend(), defaults);
  auto id = mgr.create(json{{"title", "T"}, {"genre", "g"}, {"protagonists", "Mara"}, {"description", "d"}});
  auto view = mgr.wait_idle(id);
  EXPECT_EQ(view.state->spec.scene_count, 3);
  EXPECT_TRUE(view.state->spec.edit_mode);
  EXPECT_EQ(code_of([&] { mgr.create(json{{"title", "T"}, {"scene_count", 0}}); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([&] { mgr.create(json::array()); }), ErrorCode::InvalidSpec);
}

TEST(SessionManager, EditRegenerateAdvanceCycle) {
  TempDir dir;
  SessionManager mgr(dir.path(), default_templates(), story_backend());
  auto id = mgr.create(spec_json(2, true));
  auto before = mgr.wait_idle(id);
  auto edited = mgr.submit_edits(id, add_edit());
  EXPECT_EQ(edited.state->graph.size(), before.state->graph.size() + 1);
  EXPECT_GT(edited.version, before.version);

  mgr.regenerate(id);
  auto regen = mgr.wait_idle(id);
  EXPECT_EQ(regen.state->scenes.at(0).generation, 1);
  EXPECT_EQ(regen.state->phase, Phase::awaiting_edit(1));

  mgr.advance(id);
  auto two = mgr.wait_idle(id);
  EXPECT_EQ(two.state->phase, Phase::awaiting_edit(2));
  mgr.advance(id);
  auto done = mgr.wait_idle(id);
  EXPECT_EQ(done.state->phase, Phase::finished());

  EXPECT_EQ(code_of([&] { mgr.advance(id); }), ErrorCode::WrongPhase);
  EXPECT_EQ(code_of([&] { mgr.regenerate(id); }), ErrorCode::WrongPhase);
  EXPECT_EQ(code_of([&] { mgr.submit_edits(id, add_edit()); }), ErrorCode::WrongPhase);
  EXPECT_EQ(code_of([&] { mgr.get("s000000000000"); }), ErrorCode::NotFound);

  auto report = pipeline::replay(pipeline::read_log(dir / id / "events.jsonl"), default_templates());
  EXPECT_TRUE(report.match);
  EXPECT_EQ(report.final_hash, pipeline::state_hash(*done.state));
}

TEST(SessionManager, RejectedEditsChangeNothing) {
  TempDir dir;
  SessionManager mgr(dir.path(), default_templates(), story_backend());
  auto id = mgr.create(spec_json(2, true));
  auto before = mgr.wait_idle(id);
  auto log_before = read_file(dir / id / "events.jsonl");
  kg::EditSet bad{{kg::RemoveEntry{"e999"}}, kg::EditAuthor::User};
  EXPECT_EQ(code_of([&] { mgr.submit_edits(id, bad); }), ErrorCode::UnknownEntryId);
  auto after = mgr.get(id);
  EXPECT_EQ(*after.state, *before.state);
  EXPECT_FALSE(after.busy);
  EXPECT_EQ(read_file(dir / id / "events.jsonl"), log_before);
}

TEST(SessionManager, BusyWhileJobRuns) {
  TempDir dir;
  auto gated = std::make_shared<GatedBackend>(story_backend());
  SessionManager mgr(dir.path(), default_templates(), gated);
  auto id = mgr.create(spec_json(2, true));
  mgr.wait_idle(id);

  gated->close();
  mgr.regenerate(id);
  ASSERT_TRUE(gated->wait_for_caller());
  EXPECT_TRUE(mgr.get(id).busy);
  EXPECT_EQ(code_of([&] { mgr.regenerate(id); }), ErrorCode::Busy);
  EXPECT_EQ(code_of([&] { mgr.advance(id); }), ErrorCode::Busy);
  EXPECT_EQ(code_of([&] { mgr.submit_edits(id, add_edit()); }), ErrorCode::Busy);
  EXPECT_EQ(code_of([&] { mgr.wait_idle(id, std::chrono::milliseconds(20)); }), ErrorCode::Timeout);
  gated->open();
  auto view = mgr.wait_idle(id);
  EXPECT_EQ(view.state->scenes.at(0).generation, 1);
}

TEST(SessionManager, ConcurrentMutationsAdmitExactlyOne) {
  for (int round = 0; round < 20; ++round) {
    TempDir dir;
    auto gated = std::make_shared<GatedBackend>(story_backend());
    SessionManager mgr(dir.path(), default_templates(), gated);
    auto id = mgr.create(spec_json(3, true));
    mgr.wait_idle(id);
    gated->close();

    std::atomic<int> accepted{0}, busy{0};
    std::atomic<bool> go{false};
    auto attempt = [&](auto fn) {
      while (!go) std::this_thread::yield();
      try {
        fn();
        ++accepted;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Busy) ++busy;
      }
    };
    std::thread t1(attempt, [&] { mgr.regenerate(id); });
    std::thread t2(attempt, [&] { mgr.advance(id); });
    std::thread t3(attempt, [&] { mgr.submit_edits(id, add_edit()); });
    go = true;
    t1.join();
    t2.join();
    t3.join();
    gated->open();
    auto view = mgr.wait_idle(id);
    EXPECT_EQ(accepted.load() + busy.load(), 3);
    // submit_edits is synchronous, so it may finish before a job starts.
    EXPECT_GE(accepted.load(), 1);
    EXPECT_LE(accepted.load(), 2);
    auto report = pipeline::replay(pipeline::read_log(dir / id / "events.jsonl"), default_templates());
    EXPECT_TRUE(report.match);
    EXPECT_EQ(report.final_hash, pipeline::state_hash(*view.state));
  }
}

TEST(SessionManager, RegenerateAndAdvanceRaceAdmitsOne) {
  for (int round = 0; round < 20; ++round) {
    TempDir dir;
    auto gated = std::make_shared<GatedBackend>(story_backend());
    SessionManager mgr(dir.path(), default_templates(), gated);
    auto id = mgr.create(spec_json(3, true));
    mgr.wait_idle(id);
    gated->close();
    std::atomic<int> accepted{0}, busy{0};
    std::atomic<bool> go{false};
    auto attempt = [&](auto fn) {
      while (!go) std::this_thread::yield();
      try {
        fn();
        ++accepted;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Busy) ++busy;
      }
    };
    std::thread t1(attempt, [&] { mgr.regenerate(id); });
    std::thread t2(attempt, [&] { mgr.advance(id); });
    go = true;
    t1.join();
    t2.join();
    EXPECT_EQ(accepted.load(), 1);
    EXPECT_EQ(busy.load(), 1);
    gated->open();
    mgr.wait_idle(id);
  }
}

TEST(SessionManager, FailedJobKeepsStateAndCanResume) {
  TempDir dir;
  auto flaky = std::make_shared<FlakyBackend>(story_backend(), 1);
  SessionManager mgr(dir.path(), default_templates(), flaky);
  auto id = mgr.create(spec_json(2, true));
  auto failed = mgr.wait_idle(id);
  ASSERT_TRUE(failed.last_error);
  EXPECT_EQ(failed.last_error->code, ErrorCode::BackendUnavailable);
  EXPECT_EQ(failed.state->phase, Phase::initializing());
  EXPECT_EQ(projection(failed)["last_error"]["code"], "BackendUnavailable");

  mgr.advance(id);
  auto resumed = mgr.wait_idle(id);
  EXPECT_FALSE(resumed.last_error);
  EXPECT_EQ(resumed.state->phase, Phase::awaiting_edit(1));
}

TEST(SessionManager, WaitChangeSeesProgress) {
  TempDir dir;
  auto gated = std::make_shared<GatedBackend>(story_backend());
  SessionManager mgr(dir.path(), default_templates(), gated);
  auto id = mgr.create(spec_json(2, true));
  auto idle = mgr.wait_idle(id);
  auto same = mgr.wait_change(id, idle.version, std::chrono::milliseconds(20));
  EXPECT_EQ(same.version, idle.version);
  mgr.regenerate(id);
  auto changed = mgr.wait_change(id, idle.version, std::chrono::seconds(5));
  EXPECT_GT(changed.version, idle.version);
  mgr.wait_idle(id);
}

TEST(SessionManager, RestartRecoversSessions) {
  TempDir dir;
  std::string id;
  pipeline::PipelineState expected;
  {
    SessionManager mgr(dir.path(), default_templates(), story_backend());
    id = mgr.create(spec_json(2, true));
    mgr.wait_idle(id);
    expected = *mgr.submit_edits(id, add_edit()).state;
  }
  SessionManager again(dir.path(), default_templates(), story_backend());
  EXPECT_EQ(again.recover(), 1u);
  EXPECT_EQ(again.recover(), 0u);
  auto view = again.get(id);
  EXPECT_EQ(*view.state, expected);
  EXPECT_FALSE(view.busy);

  again.advance(id);
  auto next = again.wait_idle(id);
  EXPECT_EQ(next.state->phase, Phase::awaiting_edit(2));
  auto report = pipeline::replay(pipeline::read_log(dir / id / "events.jsonl"), default_templates());
  EXPECT_TRUE(report.match);
  EXPECT_EQ(report.final_hash, pipeline::state_hash(*next.state));
}

TEST(SessionManager, CorruptLogIsSkipped) {
  TempDir dir;
  std::filesystem::create_directories(dir / "sbroken");
  write_file(dir / "sbroken" / "events.jsonl", "{\"seq\": 0}\n");
  SessionManager mgr(dir.path(), default_templates(), story_backend());
  EXPECT_EQ(mgr.recover(), 0u);
  EXPECT_EQ(code_of([&] { mgr.get("sbroken"); }), ErrorCode::NotFound);
}

TEST(SessionManager, UnwritableDirectoryFailsAtStartup) {
  TempDir dir;
  write_file(dir / "plain", "x");
  EXPECT_EQ(code_of([&] { SessionManager(dir / "plain" / "sessions", default_templates(), story_backend()); }),
            ErrorCode::StorageFailure);
  EXPECT_EQ(code_of([&] { ensure_writable_dir(dir / "plain"); }), ErrorCode::StorageFailure);
  EXPECT_NO_THROW(ensure_writable_dir(dir / "fresh" / "nested"));
}

TEST(Config, ParsesAndValidates) {
  auto cfg = config_from_json(json::parse(R"({
    "listen": "0.0.0.0:9000", "session_dir": "/tmp/s",
    "backend": {"kind": "http", "endpoint": "http://localhost:1234/v1/chat/completions", "model": "m",
                "auth_env": "KEY", "timeout_seconds": 5, "max_retries": 1},
    "defaults": {"scene_count": 7, "edit_mode": false, "type_set": ["people", "places"]}})"));
  EXPECT_EQ(cfg.host, "0.0.0.0");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_EQ(cfg.backend.kind, BackendConfig::Kind::Http);
  EXPECT_EQ(cfg.backend.http.model, "m");
  EXPECT_EQ(cfg.defaults.scene_count, 7);
  EXPECT_FALSE(cfg.defaults.edit_mode);
  EXPECT_EQ(cfg.defaults.type_set.size(), 2u);
  EXPECT_THROW(config_from_json(json{{"listen", "nope"}}), Error);
  EXPECT_THROW(config_from_json(json{{"backend", {{"kind", "carrier-pigeon"}}}}), Error);
}

TEST(Config, ScriptFiles) {
  auto routed = script_from_json(json{{"Summarize", {"one", {{"error", "Timeout"}}}}});
  textgen::GenerationRequest req;
  req.template_id = textgen::TemplateId::Summarize;
  req.prompt = "p";
  EXPECT_EQ(routed->complete(req).text, "one");
  EXPECT_EQ(code_of([&] { routed->complete(req); }), ErrorCode::Timeout);
  auto flat = script_from_json(json::array({"a", "b"}));
  EXPECT_EQ(flat->complete(req).text, "a");
  EXPECT_THROW(script_from_json(json(3)), Error);
  EXPECT_THROW(script_from_json(json::array({{{"error", "NotACode"}}})), Error);
}

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::WrongPhase), 409);
  EXPECT_EQ(http_status(ErrorCode::Busy), 429);
  EXPECT_EQ(http_status(ErrorCode::UnknownEntryId), 422);
  EXPECT_EQ(http_status(ErrorCode::InvalidSpec), 422);
  EXPECT_EQ(http_status(ErrorCode::InvalidArgument), 400);
  EXPECT_EQ(http_status(ErrorCode::BackendUnavailable), 502);
  EXPECT_EQ(http_status(ErrorCode::Timeout), 504);
  EXPECT_EQ(http_status(ErrorCode::StorageFailure), 500);
}

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    gated = std::make_shared<GatedBackend>(story_backend(6));
    mgr = std::make_unique<SessionManager>(dir.path(), default_templates(), gated);
    api = std::make_unique<ApiServer>(*mgr);
    port = api->bind("127.0.0.1", 0);
    api->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(10, 0);
  }
  void TearDown() override {
    gated->open();
    api->stop();
  }

  json post(const std::string& path, const json& body, int expected) {
    auto res = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body, nullptr, false);
  }
  json get(const std::string& path, int expected) {
    auto res = client->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body, nullptr, false);
  }
  std::string create(int scenes, bool edit) {
    auto body = post("/sessions", spec_json(scenes, edit), 201);
    auto id = body["id"].get<std::string>();
    mgr->wait_idle(id);
    return id;
  }

  TempDir dir;
  std::shared_ptr<GatedBackend> gated;
  std::unique_ptr<SessionManager> mgr;
  std::unique_ptr<ApiServer> api;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
};

TEST_F(ApiTest, CreateGetGraph) {
  auto id = create(2, true);
  auto state = get("/sessions/" + id, 200);
  EXPECT_EQ(state["id"], id);
  EXPECT_EQ(state["phase"], "AwaitingEdit(1)");
  EXPECT_EQ(state["busy"], false);
  auto graph = get("/sessions/" + id + "/graph", 200);
  EXPECT_EQ(graph["size"], state["graph_size"]);
  EXPECT_TRUE(graph["graph"].contains("partitions"));
}

TEST_F(ApiTest, ErrorStatuses) {
  auto missing = get("/sessions/s000000000000", 404);
  EXPECT_EQ(missing["error"]["code"], "NotFound");
  post("/sessions/s000000000000/regenerate", json::object(), 404);

  auto res = client->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  auto invalid = post("/sessions", json{{"title", "t"}, {"scene_count", 0}}, 422);
  EXPECT_EQ(invalid["error"]["code"], "InvalidSpec");

  auto id = create(1, false);
  EXPECT_EQ(mgr->get(id).state->phase, Phase::finished());
  auto phase = post("/sessions/" + id + "/regenerate", json::object(), 409);
  EXPECT_EQ(phase["error"]["code"], "WrongPhase");
  post("/sessions/" + id + "/advance", json::object(), 409);
  post("/sessions/" + id + "/edits", json{{"commands", json::array()}}, 409);
  get("/sessions/" + id + "/export?format=xml", 400);
}

TEST_F(ApiTest, EditsValidateAndApply) {
  auto id = create(2, true);
  auto size = mgr->get(id).state->graph.size();
  auto rejected = post("/sessions/" + id + "/edits",
                       json{{"commands", {{{"op", "remove"}, {"id", "e999"}}}}}, 422);
  EXPECT_EQ(rejected["error"]["code"], "UnknownEntryId");
  ASSERT_EQ(rejected["error"]["diagnostics"].size(), 1u);
  EXPECT_EQ(rejected["error"]["diagnostics"][0]["command"], 0);

  auto bad_field = post("/sessions/" + id + "/edits",
                        json{{"commands", {{{"op", "add"}, {"entry", {{"subject", "A -> B"}, {"object", "C"},
                                                                      {"relation", "r"}, {"type", "objects"}}}}}}},
                        422);
  EXPECT_EQ(bad_field["error"]["code"], "InvalidField");
  EXPECT_EQ(mgr->get(id).state->graph.size(), size);

  auto ok = post("/sessions/" + id + "/edits",
                 json{{"author", "system"},
                      {"commands", {{{"op", "add"}, {"entry", {{"subject", "Mara"}, {"object", "Blaster"},
                                                              {"relation", "breaks"}, {"type", "objects"}}}}}}},
                 200);
  EXPECT_EQ(ok["size"], size + 1);
  bool user = false;
  for (const auto& e : mgr->get(id).state->graph.entries()) user |= e.provenance == kg::Provenance::user_edit();
  EXPECT_TRUE(user);
}

TEST_F(ApiTest, BusyIs429AndJobsAre202) {
  auto id = create(2, true);
  gated->close();
  post("/sessions/" + id + "/regenerate", json::object(), 202);
  ASSERT_TRUE(gated->wait_for_caller());
  auto busy = post("/sessions/" + id + "/advance", json::object(), 429);
  EXPECT_EQ(busy["error"]["code"], "Busy");
  post("/sessions/" + id + "/regenerate", json::object(), 429);
  post("/sessions/" + id + "/edits", json{{"commands", json::array()}}, 429);
  EXPECT_EQ(get("/sessions/" + id, 200)["busy"], true);
  gated->open();
  mgr->wait_idle(id);
  EXPECT_EQ(get("/sessions/" + id, 200)["scenes"][0]["generation"], 1);
  post("/sessions/" + id + "/advance", json::object(), 202);
  EXPECT_EQ(mgr->wait_idle(id).state->phase, Phase::awaiting_edit(2));
}

TEST_F(ApiTest, ExportFormats) {
  auto id = create(2, false);
  auto text = client->Get("/sessions/" + id + "/export");
  ASSERT_TRUE(text);
  EXPECT_EQ(text->status, 200);
  EXPECT_NE(text->body.find("## Scene 1"), std::string::npos);
  EXPECT_NE(text->body.find("## Scene 2"), std::string::npos);
  auto j = get("/sessions/" + id + "/export?format=json", 200);
  EXPECT_EQ(pipeline::state_from_json(j), *mgr->get(id).state);
}

TEST_F(ApiTest, EventStreamReportsChangesUntilFinished) {
  auto id = create(2, true);
  std::string stream;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    c.Get("/sessions/" + id + "/events", [&](const char* data, std::size_t len) {
      stream.append(data, len);
      return true;
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  mgr->advance(id);
  mgr->wait_idle(id);
  mgr->advance(id);
  mgr->wait_idle(id);
  reader.join();
  EXPECT_EQ(stream.rfind("event: state\n", 0), 0u);
  EXPECT_NE(stream.find("\"phase\":\"AwaitingEdit(2)\""), std::string::npos);
  EXPECT_NE(stream.find("event: finished\n"), std::string::npos);
}
