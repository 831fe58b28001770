// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "storykg/error.hpp"
#include "storykg/kg/grammar.hpp"
#include "storykg/pipeline/event_log.hpp"
#include "storykg/pipeline/replay.hpp"
#include "storykg/service/http_api.hpp"
#include "storykg/service/session_manager.hpp"
#include "storykg/stats/report.hpp"
#include "storykg/stats/wilcoxon.hpp"
#include "test_support.hpp"

using namespace storykg;
using nlohmann::json;
using namespace storykg::testing;

namespace {

using Outcome = std::optional<std::string>;  // failure reason

#define REQUIRE(cond, msg)                       \
  do {                                           \
    if (!(cond)) {                               \
      std::ostringstream why_;                   \
      why_ << msg;                               \
      return why_.str();                         \
    }                                            \
  } while (0)

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "storykg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

// Grammar -------------------------------------------------------------------

std::string random_field(std::mt19937& rng, std::size_t max_len, bool allow_empty) {
  static const std::vector<std::string> pieces = {"a", "Z", "0", " ", ":", "-", ">", "_", ".", ",", "'", "é", "→x",
                                                  "x→", "->", " : ", "|", "#", "\t", "雨", "Mara", "Vault Door"};
  std::uniform_int_distribution<std::size_t> len(allow_empty ? 0 : 1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string out;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) out += pieces[pick(rng)];
  return out;
}

Outcome grammar_round_trip() {
  const kg::NodeType type("characters");
  std::mt19937 rng(1);
  kg::IdMinter ids;
  int checked = 0;
  for (int attempts = 0; checked < 1000 && attempts < 500000; ++attempts) {
    kg::KGEntry e{"e1", random_field(rng, 6, false), random_field(rng, 6, false), random_field(rng, 4, false),
                  random_field(rng, 8, true), type, {}};
    if (kg::check_entry_fields(e)) continue;
    auto back = kg::parse_entry(kg::serialize_entry(e), type, ids);
    REQUIRE(back.subject == e.subject && back.object == e.object && back.relation == e.relation &&
                back.description == e.description,
            "round trip broke on: " << kg::serialize_entry(e));
    ++checked;
  }
  REQUIRE(checked == 1000, "only " << checked << " valid entries generated");

  std::uniform_int_distribution<int> byte(0, 255);
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 10000; ++i) {
    std::string s(i % 1000 == 1 ? 64 * 1024 : static_cast<std::size_t>(byte(rng)), '\0');
    for (auto& c : s) c = static_cast<char>(byte(rng));
    if (i % 2 == 0) s.insert(s.size() / 2, " -> x -> y : ");
    try {
      auto e = kg::parse_entry(s, type, ids);
      REQUIRE(!kg::check_entry_fields(e), "parser accepted an invalid entry");
    } catch (const MalformedEntryError&) {
    }
    auto block = kg::parse_graph_block(s, type, kg::ParseMode::Lenient, ids);
    for (const auto& e : block.entries) REQUIRE(!kg::check_entry_fields(e), "block parser accepted an invalid entry");
  }
  auto elapsed = seconds_since(start);
  REQUIRE(elapsed < 5.0, "fuzz took " << elapsed << " s");
  return std::nullopt;
}

// Statistics ----------------------------------------------------------------

double sign_flip_p(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs)
    if (d != 0) nz.push_back(d);
  const std::size_t n = nz.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (double other : nz) {
      below += std::abs(other) < std::abs(nz[i]);
      equal += std::abs(other) == std::abs(nz[i]);
    }
    ranks[i] = below + (equal + 1) / 2;
  }
  double total = std::accumulate(ranks.begin(), ranks.end(), 0.0), wp = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) wp += ranks[i];
  double w = std::min(wp, total - wp);
  std::size_t hits = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double t = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) t += ranks[i];
    hits += std::min(t, total - t) <= w + 1e-9;
  }
  return static_cast<double>(hits) / static_cast<double>(1u << n);
}

Outcome wilcoxon_oracle() {
  auto hand = stats::wilcoxon_signed_rank(std::vector<double>{1, 2, 3});
  REQUIRE(hand.w == 0.0 && hand.p_two_sided == 0.25, "d=[1,2,3] gave W=" << hand.w << " p=" << hand.p_two_sided);
  std::mt19937 rng(2);
  std::uniform_int_distribution<int> len(1, 8), diff(-4, 4);
  int tested = 0;
  while (tested < 500) {
    std::vector<double> d(static_cast<std::size_t>(len(rng)));
    for (auto& x : d) x = diff(rng);
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0; })) continue;
    auto got = stats::wilcoxon_signed_rank(d).p_two_sided;
    auto want = sign_flip_p(d);
    REQUIRE(std::abs(got - want) <= 1e-12, "vector " << tested << ": p=" << got << " oracle=" << want);
    ++tested;
  }
  return std::nullopt;
}

Outcome statistics_fidelity() {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> score(1, 5);
  stats::Dataset ds;
  for (int p = 0; p < 5; ++p) {
    for (const char* cond : {"KG", "NoKG", "Human"}) {
      stats::RatingRecord r;
      r.participant_id = "p" + std::to_string(p);
      r.condition = cond;
      for (auto& x : r.criteria) x = score(rng);
      r.holistic = score(rng);
      ds.records.push_back(r);
    }
  }
  stats::validate(ds);
  for (const auto& cond : ds.conditions()) {
    auto g = ds.group(cond);
    long long sum = 0, sum_sq = 0;
    for (const auto& r : g.records) {
      long long s = std::accumulate(r.criteria.begin(), r.criteria.end(), 0LL);
      sum += s;
      sum_sq += s * s;
    }
    const long long n = static_cast<long long>(g.n());
    double mean = static_cast<double>(sum) / static_cast<double>(8 * n);
    double sd = std::sqrt(static_cast<double>(n * sum_sq - sum * sum) / static_cast<double>(64 * n * n));
    auto got = stats::group_aggregate_mean(g);
    REQUIRE(std::abs(got.mean - mean) <= 1e-12 && std::abs(got.sd - sd) <= 1e-12,
            cond << ": " << got.mean << "/" << got.sd << " vs " << mean << "/" << sd);
    for (auto c : stats::kCriteria) {
      std::vector<double> v;
      for (const auto& r : g.records) v.push_back(r.rating(c));
      double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()), ss = 0;
      for (double x : v) ss += (x - m) * (x - m);
      auto cm = stats::group_criterion_mean(g, c);
      REQUIRE(std::abs(cm.mean - m) <= 1e-12 && std::abs(cm.sd - std::sqrt(ss / static_cast<double>(v.size()))) <= 1e-12,
              cond << " criterion mismatch");
    }
    auto mutated = g;
    for (auto& r : mutated.records) r.holistic = r.holistic == 5 ? 1 : 5;
    auto after = stats::group_aggregate_mean(mutated);
    REQUIRE(after.mean == got.mean && after.sd == got.sd, "holistic leaked into the aggregate");
  }
  return std::nullopt;
}

Outcome report_formatting() {
  const std::pair<double, const char*> cases[] = {{3.725, "3.73"}, {2.675, "2.68"}, {1.005, "1.01"},
                                                  {0.125, "0.13"}, {0.115, "0.12"}, {9.995, "10.00"},
                                                  {4.0, "4.00"},   {1.0349, "1.03"}};
  for (auto [x, want] : cases) REQUIRE(stats::format_fixed2(x) == want, x << " -> " << stats::format_fixed2(x));
  stats::Dataset ds;
  // Aggregates 3.25, 4.0, 4.0, 2.0 -> mean 3.3125, SD 0.8197...
  for (auto [id, v, plot] : {std::tuple{"p1", 3, 5}, {"p2", 4, 4}, {"p3", 4, 4}, {"p4", 2, 2}}) {
    stats::RatingRecord r;
    r.participant_id = id;
    r.condition = "KG";
    r.criteria.fill(v);
    r.rating(stats::Criterion::Plot) = plot;
    r.holistic = v;
    ds.records.push_back(r);
  }
  auto text = stats::render_report(ds, {{"KG", "KG", std::nullopt}, {"Empty", "None", std::nullopt}});
  REQUIRE(text.find("3.31 (0.82)") != std::string::npos, "aggregate cell missing:\n" << text);
  REQUIRE(text.find("3.75 (1.09)") != std::string::npos, "plot cell missing:\n" << text);
  REQUIRE(text.find(std::string(stats::kEmptyCell)) != std::string::npos, "empty group not marked");
  return std::nullopt;
}

// Pipeline ------------------------------------------------------------------

Outcome call_sequence() {
  auto backend = story_backend();
  pipeline::Pipeline p(default_templates(), backend);
  auto start = std::chrono::steady_clock::now();
  auto state = p.run(small_spec(5));
  auto elapsed = seconds_since(start);
  REQUIRE(state.phase == pipeline::Phase::finished() && state.scenes.size() == 5, "run did not finish 5 scenes");
  using textgen::TemplateId;
  std::vector<TemplateId> want{TemplateId::InitializeNodes, TemplateId::ExtractKG, TemplateId::ExtractKG,
                               TemplateId::ExtractKG, TemplateId::ExtractKG};
  for (int i = 1; i <= 5; ++i) {
    if (i > 1) want.push_back(TemplateId::Query);
    for (auto id : {TemplateId::GenerateScene, TemplateId::Summarize, TemplateId::UpdateNodes}) want.push_back(id);
    for (std::size_t k = 0; k < state.spec.type_set.size(); ++k) want.push_back(TemplateId::UpdateKG);
  }
  std::vector<TemplateId> got;
  for (const auto& r : backend->requests()) got.push_back(r.template_id);
  REQUIRE(got == want, "call sequence differs (" << got.size() << " calls, expected " << want.size() << ")");
  REQUIRE(elapsed < 1.0, "run took " << elapsed << " s");
  return std::nullopt;
}

Outcome ablation_purity() {
  TempDir dir;
  std::string out;
  for (const char* mode : {"on", "off"}) {
    int code = run_cli({"run", fixture("spec.json").string(), "--kg", mode, "--backend", "scripted", "--script",
                        fixture("script.json").string(), "--out", (dir / mode).string()},
                       &out);
    REQUIRE(code == cli::kExitOk, "run --kg " << mode << " failed: " << out);
  }
  auto off = pipeline::read_log(dir / "off" / "events.jsonl");
  std::size_t calls = 0;
  for (const auto& r : off) {
    if (r["kind"] != "GeneratorCall") continue;
    ++calls;
    auto id = textgen::parse_template_id(r["template_id"].get<std::string>());
    REQUIRE(id && !textgen::is_kg_template(*id), "kg-off run called " << r["template_id"]);
  }
  REQUIRE(calls > 0, "kg-off run made no calls");
  auto story = read_file(dir / "off" / "story.txt");
  REQUIRE(story.find("## Scene 5") != std::string::npos, "kg-off export incomplete");
  auto on = pipeline::read_log(dir / "on" / "events.jsonl");
  auto spec_on = pipeline::spec_from_json(on.front()["spec"]);
  auto spec_off = pipeline::spec_from_json(off.front()["spec"]);
  REQUIRE(spec_on.kg_enabled && !spec_off.kg_enabled, "runs did not toggle the graph");
  REQUIRE(pipeline::story_prompt_json(spec_on).dump() == pipeline::story_prompt_json(spec_off).dump(),
          "story specs differ between arms");
  return std::nullopt;
}

Outcome edit_mode() {
  auto backend = story_backend();
  pipeline::Pipeline p(default_templates(), backend);
  auto st = p.step(p.initialize(p.create(small_spec(3, true, true))));
  REQUIRE(st.phase == pipeline::Phase::awaiting_edit(1), "scene 1 did not stop for edits");
  kg::KGEntry e{"", "Mara", "Blaster", "breaks", "weapon shatters", kg::NodeType("objects"), {}};
  st = p.submit_edits(std::move(st), kg::EditSet{{kg::AddEntry{e}}, kg::EditAuthor::User});
  const auto& added = st.graph.partition(kg::NodeType("objects"))->entries.back();
  const auto line = kg::serialize_entry(added);
  st = p.regenerate_current(std::move(st));
  auto reqs = backend->requests();
  auto it = std::find_if(reqs.rbegin(), reqs.rend(),
                         [](const auto& r) { return r.template_id == textgen::TemplateId::Regenerate; });
  REQUIRE(it != reqs.rend(), "no Regenerate call");
  REQUIRE(it->prompt.find(line) != std::string::npos, "Regenerate prompt lacks '" << line << "'");
  auto ones = std::count_if(st.context.basis.begin(), st.context.basis.end(), [](auto& b) { return b.first == 1; });
  REQUIRE(ones == 1, "basis holds " << ones << " pairs for scene 1");
  st = p.regenerate_current(std::move(st));
  REQUIRE(st.scenes.at(0).generation == 2, "generation is " << st.scenes.at(0).generation);
  return std::nullopt;
}

// Persistence ---------------------------------------------------------------

Outcome crash_replay() {
  TempDir dir;
  const std::string id = "s0123456789ab";
  std::vector<std::string> lines;
  {
    service::SessionManager mgr(dir.path(), default_templates(), story_backend());
    auto sid = mgr.create(pipeline::to_json(small_spec(2, true, true)));
    mgr.wait_idle(sid);
    kg::KGEntry e{"", "Mara", "Lantern", "carries", "", kg::NodeType("objects"), {}};
    mgr.submit_edits(sid, kg::EditSet{{kg::AddEntry{e}}, kg::EditAuthor::User});
    mgr.regenerate(sid);
    mgr.wait_idle(sid);
    mgr.advance(sid);
    mgr.wait_idle(sid);
    mgr.advance(sid);
    auto done = mgr.wait_idle(sid);
    REQUIRE(done.state->phase == pipeline::Phase::finished() && !done.last_error, "session did not finish");
    std::istringstream in(read_file(dir / sid / "events.jsonl"));
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  REQUIRE(lines.size() > 10, "log too short");

  // Kill between any two appends (and mid-append): every prefix of the log.
  std::size_t restarts = 0;
  for (std::size_t n = 1; n <= lines.size(); ++n) {
    for (bool torn : {false, true}) {
      if (torn && n == lines.size()) continue;
      TempDir root;
      std::filesystem::create_directories(root / id);
      std::string text;
      for (std::size_t i = 0; i < n; ++i) text += lines[i] + "\n";
      if (torn) text += lines[n].substr(0, lines[n].size() / 2);
      write_file(root / id / "events.jsonl", text);

      service::SessionManager mgr(root.path(), default_templates(), story_backend());
      if (mgr.recover() != 1) REQUIRE(false, "prefix " << n << " not recovered");
      auto state_hash = pipeline::state_hash(*mgr.get(id).state);
      auto report = pipeline::replay(pipeline::read_log(root / id / "events.jsonl"), default_templates());
      REQUIRE(report.match && report.final_hash == state_hash, "prefix " << n << " recovered a diverging state");
      std::string out;
      int code = run_cli({"replay", (root / id / "events.jsonl").string()}, &out);
      REQUIRE(code == cli::kExitOk && out.rfind("MATCH", 0) == 0, "replay of prefix " << n << ": " << out);
      ++restarts;
    }
  }
  REQUIRE(restarts == 2 * lines.size() - 1, "covered " << restarts << " restarts");
  return std::nullopt;
}

// Service -------------------------------------------------------------------

Outcome service_contract() {
  TempDir dir;
  auto gated = std::make_shared<GatedBackend>(story_backend(8));
  service::SessionManager mgr(dir.path(), default_templates(), gated);
  service::ApiServer api(mgr);
  int port = api.bind("127.0.0.1", 0);
  api.start();
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(10, 0);
  auto post = [&](const std::string& path, const json& body) {
    auto res = c.Post(path, body.dump(), "application/json");
    return res ? res->status : -1;
  };
  auto create = [&](int scenes, bool edit) {  // the scripted backend serves one session
    auto res = c.Post("/sessions", pipeline::to_json(small_spec(scenes, true, edit)).dump(), "application/json");
    if (!res || res->status != 201) return std::string();
    auto id = json::parse(res->body)["id"].get<std::string>();
    mgr.wait_idle(id);
    return id;
  };

  auto id = create(8, true);
  REQUIRE(!id.empty(), "create failed");
  int s = post("/sessions/" + id + "/edits", json{{"commands", {{{"op", "remove"}, {"id", "e999"}}}}});
  REQUIRE(s == 422, "unknown entry id returned " << s);
  s = post("/sessions", json{{"title", "x"}, {"scene_count", -1}});
  REQUIRE(s == 422, "invalid spec returned " << s);

  for (int round = 0; round < 5; ++round) {
    gated->close();
    std::atomic<bool> go{false};
    int a = 0, b = 0;
    std::thread t1([&] {
      httplib::Client c1("127.0.0.1", port);
      while (!go) std::this_thread::yield();
      auto r = c1.Post("/sessions/" + id + "/regenerate", "{}", "application/json");
      a = r ? r->status : -1;
    });
    std::thread t2([&] {
      httplib::Client c2("127.0.0.1", port);
      while (!go) std::this_thread::yield();
      auto r = c2.Post("/sessions/" + id + "/advance", "{}", "application/json");
      b = r ? r->status : -1;
    });
    go = true;
    t1.join();
    t2.join();
    std::multiset<int> statuses{a, b};
    REQUIRE(statuses == (std::multiset<int>{202, 429}), "round " << round << ": statuses " << a << ", " << b);
    if (!gated->wait_for_caller()) REQUIRE(false, "job never reached the backend");
    s = post("/sessions/" + id + "/edits", json{{"commands", json::array()}});
    REQUIRE(s == 429, "edits during a job returned " << s);
    gated->open();
    auto view = mgr.wait_idle(id);
    if (view.state->phase.kind != pipeline::Phase::Kind::AwaitingEdit) break;
  }
  while (mgr.get(id).state->phase.kind == pipeline::Phase::Kind::AwaitingEdit) {
    mgr.advance(id);
    mgr.wait_idle(id);
  }
  REQUIRE(mgr.get(id).state->phase == pipeline::Phase::finished(), "story did not finish");
  s = post("/sessions/" + id + "/regenerate", json::object());
  REQUIRE(s == 409, "regenerate on a finished story returned " << s);
  s = post("/sessions/" + id + "/advance", json::object());
  REQUIRE(s == 409, "advance on a finished story returned " << s);
  api.stop();
  return std::nullopt;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"grammar round-trip and fuzz", grammar_round_trip},
      {"wilcoxon oracle equivalence", wilcoxon_oracle},
      {"statistics fidelity", statistics_fidelity},
      {"report formatting", report_formatting},
      {"scene call-sequence conformance", call_sequence},
      {"ablation purity", ablation_purity},
      {"edit-mode semantics", edit_mode},
      {"crash/replay", crash_replay},
      {"service contract", service_contract},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome result;
    try {
      result = check();
    } catch (const std::exception& e) {
      result = std::string("exception: ") + e.what();
    }
    if (result) {
      ++failed;
      std::cout << "FAIL " << name << ": " << *result << "\n";
    } else {
      std::cout << "PASS " << name << "\n";
    }
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
