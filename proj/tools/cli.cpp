#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <sstream>
#include <thread>

#include "storykg/error.hpp"
#include "storykg/kg/json.hpp"
#include "storykg/pipeline/event_log.hpp"
#include "storykg/pipeline/pipeline.hpp"
#include "storykg/pipeline/replay.hpp"
#include "storykg/service/config.hpp"
#include "storykg/service/http_api.hpp"
#include "storykg/service/session_manager.hpp"
#include "storykg/stats/dataset_io.hpp"
#include "storykg/stats/report.hpp"

namespace storykg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct RunOptions {
  std::string spec;
  std::string kg;
  std::string backend = "scripted";
  std::string script;
  std::string config;
  std::string endpoint;
  std::string model;
  std::string auth_env;
  std::string templates;
  std::string out = "out";
  int scenes = 0;
};

struct ReplayOptions {
  std::string log;
  std::string templates;
  std::string state_out;
};

struct StatsOptions {
  std::string dataset;
  std::vector<std::string> groups;
  std::vector<std::string> compares;
  std::string a;
  std::string b;
  std::string group;
  std::string measure = "aggregate";
  std::string method = "auto";
  bool sample_sd = false;
  bool json_out = false;
};

struct ServeOptions {
  std::string config;
  std::string listen;
  std::string session_dir;
  std::string script;
  std::string templates;
};

// Usage problems are reported with this and mapped to kExitUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string(what) + " not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
}

std::shared_ptr<const textgen::TemplateSet> load_templates(const std::string& dir) {
  if (dir.empty()) return std::make_shared<const textgen::TemplateSet>(textgen::TemplateSet::defaults());
  if (!fs::is_directory(dir)) throw UsageError("template directory not found: " + dir);
  return std::make_shared<const textgen::TemplateSet>(textgen::TemplateSet::load(dir));
}

std::shared_ptr<textgen::GeneratorBackend> run_backend(const RunOptions& o) {
  service::BackendConfig cfg;
  if (!o.config.empty()) cfg = service::load_config(o.config).backend;
  if (o.backend == "scripted") {
    cfg.kind = service::BackendConfig::Kind::Scripted;
    if (!o.script.empty()) cfg.script = o.script;
    if (cfg.script.empty()) throw UsageError("--backend scripted needs --script");
    if (!fs::exists(cfg.script)) throw UsageError("script not found: " + cfg.script.string());
  } else {
    cfg.kind = service::BackendConfig::Kind::Http;
    if (!o.endpoint.empty()) cfg.http.endpoint = o.endpoint;
    if (!o.model.empty()) cfg.http.model = o.model;
    if (!o.auth_env.empty()) cfg.http.auth_env = o.auth_env;
    if (cfg.http.endpoint.empty()) throw UsageError("--backend http needs --endpoint or a config file");
  }
  return service::make_backend(cfg);
}

int cmd_run(const RunOptions& o, std::ostream& out) {
  auto text = read_text(o.spec, "spec file");
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw UsageError("spec file is not valid JSON: " + o.spec);
  auto spec = pipeline::spec_from_json(j);
  if (!o.kg.empty()) spec.kg_enabled = o.kg == "on";
  if (o.scenes > 0) spec.scene_count = o.scenes;
  spec.edit_mode = false;

  auto templates = load_templates(o.templates);
  auto backend = run_backend(o);
  pipeline::Pipeline pipe(templates, backend);
  auto state = pipe.create(spec);

  fs::path dir(o.out);
  fs::create_directories(dir);
  fs::remove(dir / "events.jsonl");
  pipeline::EventLogWriter writer(dir / "events.jsonl");
  pipeline::SessionRecorder recorder(writer);
  recorder.record_create(state);

  while (state.phase.kind != pipeline::Phase::Kind::Finished) {
    pipeline::OpLog log;
    bool init = state.phase.kind == pipeline::Phase::Kind::Initializing;
    state = init ? pipe.initialize(std::move(state), &log) : pipe.step(std::move(state), &log);
    recorder.commit(init ? pipeline::OpKind::Initialize : pipeline::OpKind::Step, log, state);
  }

  write_text(dir / "story.txt", pipeline::export_text(state));
  write_text(dir / "graph.json", json{{"graph", kg::to_json(state.graph)}, {"nodes", kg::to_json(state.registry)}}.dump(2));
  write_text(dir / "state.json", pipeline::to_json(state).dump(2));
  out << "kg " << (spec.kg_enabled ? "on" : "off") << ": " << state.scenes.size() << " scenes, " << state.graph.size()
      << " graph entries, state " << pipeline::state_hash(state) << "\n";
  out << "wrote " << (dir / "story.txt").string() << ", graph.json, state.json, events.jsonl\n";
  return kExitOk;
}

int cmd_replay(const ReplayOptions& o, std::ostream& out) {
  if (!fs::exists(o.log)) throw UsageError("log not found: " + o.log);
  auto records = pipeline::read_log(o.log);
  auto report = pipeline::replay(records, load_templates(o.templates));
  if (!report.state) throw Error(ErrorCode::CorruptLog, "log holds no committed operation");
  for (const auto& m : report.mismatches) out << "  " << m << "\n";
  if (report.ignored_records > 0) {
    out << "  ignored " << report.ignored_records << " record(s) of an unfinished operation\n";
  }
  if (!o.state_out.empty()) write_text(o.state_out, pipeline::to_json(*report.state).dump(2));
  out << (report.match ? "MATCH" : "MISMATCH") << " " << report.committed_ops << " operations, state "
      << report.final_hash << " (recorded " << report.stored_hash << ")\n";
  return report.match ? kExitOk : kExitFailure;
}

stats::MethodChoice parse_method(const std::string& m) {
  if (m == "auto") return stats::MethodChoice::Auto;
  if (m == "exact") return stats::MethodChoice::Exact;
  if (m == "normal") return stats::MethodChoice::NormalApprox;
  throw UsageError("--method must be auto, exact or normal");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

stats::Dataset load_dataset_arg(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("dataset not found: " + path);
  return stats::load_dataset(path);
}

int cmd_stats_report(const StatsOptions& o, std::ostream& out) {
  auto ds = load_dataset_arg(o.dataset);
  std::vector<stats::GroupSpec> groups;
  for (const auto& g : o.groups) {
    auto eq = g.find('=');
    stats::GroupSpec spec;
    std::string rhs = eq == std::string::npos ? g : g.substr(eq + 1);
    spec.label = eq == std::string::npos ? g : g.substr(0, eq);
    auto at = rhs.find('@');
    spec.condition = rhs.substr(0, at);
    if (at != std::string::npos) spec.genre_group = rhs.substr(at + 1);
    groups.push_back(std::move(spec));
  }
  std::vector<stats::ComparisonSpec> comparisons;
  for (const auto& c : o.compares) {
    auto parts = split(c, ',');
    if (parts.size() < 2 || parts.size() > 4) throw UsageError("--compare takes A,B[,measure[,genre]]: " + c);
    stats::ComparisonSpec spec{parts[0], parts[1], std::nullopt, stats::Measure::aggregate()};
    if (parts.size() > 2) spec.measure = stats::parse_measure(parts[2]);
    if (parts.size() > 3) spec.genre_group = parts[3];
    comparisons.push_back(std::move(spec));
  }
  stats::ReportOptions opts{o.sample_sd ? stats::SdKind::Sample : stats::SdKind::Population, parse_method(o.method)};
  auto report = stats::build_report(ds, groups, comparisons, opts);
  if (o.json_out) {
    out << stats::to_json(report).dump(2) << "\n";
  } else {
    out << stats::render_report(report);
  }
  return kExitOk;
}

int cmd_stats_compare(const StatsOptions& o, std::ostream& out) {
  auto ds = load_dataset_arg(o.dataset);
  auto measure = stats::parse_measure(o.measure);
  std::optional<std::set<std::string>> members;
  std::optional<std::string> label;
  if (!o.group.empty()) {
    members = ds.participants_in(o.group);
    label = o.group;
  }
  auto cmp = stats::paired_subset(ds.group(o.a), ds.group(o.b), members, label);
  auto r = stats::compare_conditions(cmp, measure, parse_method(o.method));
  if (o.json_out) {
    auto j = stats::to_json(r);
    j["a"] = o.a;
    j["b"] = o.b;
    j["measure"] = stats::to_string(measure);
    j["pairs"] = cmp.pairs.size();
    j["group"] = label ? json(*label) : json(nullptr);
    out << j.dump(2) << "\n";
  } else {
    out << o.a << " vs " << o.b;
    if (label) out << " [" << *label << "]";
    out << ", " << stats::to_string(measure) << ": pairs=" << cmp.pairs.size() << " n_used=" << r.n_used
        << " W+=" << stats::format_fixed2(r.w_plus) << " W-=" << stats::format_fixed2(r.w_minus)
        << " W=" << stats::format_fixed2(r.w) << " p=" << stats::format_p(r.p_two_sided) << " ("
        << stats::to_string(r.method) << ")\n";
  }
  return kExitOk;
}

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  service::ServiceConfig cfg;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw UsageError("config not found: " + o.config);
    cfg = service::load_config(o.config);
  }
  if (!o.listen.empty()) {
    auto c = service::config_from_json(json{{"listen", o.listen}});
    cfg.host = c.host;
    cfg.port = c.port;
  }
  if (!o.session_dir.empty()) cfg.session_dir = o.session_dir;
  if (!o.script.empty()) {
    cfg.backend.kind = service::BackendConfig::Kind::Scripted;
    cfg.backend.script = o.script;
  }
  if (!o.templates.empty()) cfg.template_dir = o.templates;

  auto templates = load_templates(cfg.template_dir ? cfg.template_dir->string() : std::string());
  service::SessionManager sessions(cfg.session_dir, templates, service::make_backend(cfg.backend), cfg.defaults);
  auto recovered = sessions.recover();
  service::ApiServer server(sessions);
  int port = server.bind(cfg.host, cfg.port);
  server.start();
  out << "listening on http://" << cfg.host << ":" << port << " (" << recovered << " sessions recovered)\n"
      << std::flush;

  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph guided story generation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Generate a whole story headlessly (edit mode off)");
  run->add_option("spec", run_opts.spec, "Story spec JSON")->required();
  run->add_option("--kg", run_opts.kg, "Knowledge graph on or off")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--backend", run_opts.backend, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
  run->add_option("--script", run_opts.script, "Scripted backend outputs (JSON)");
  run->add_option("--config", run_opts.config, "Config file with a backend section");
  run->add_option("--endpoint", run_opts.endpoint, "Chat-completions URL for the http backend");
  run->add_option("--model", run_opts.model, "Model name for the http backend");
  run->add_option("--auth-env", run_opts.auth_env, "Environment variable holding the API key");
  run->add_option("--templates", run_opts.templates, "Directory of prompt template overrides");
  run->add_option("--scenes", run_opts.scenes, "Scene count (default: the spec's, else 5)")->check(CLI::PositiveNumber);
  run->add_option("--out", run_opts.out, "Output directory")->capture_default_str();

  ReplayOptions replay_opts;
  auto* replay = app.add_subcommand("replay", "Re-execute a session log and verify it");
  replay->add_option("log", replay_opts.log, "events.jsonl")->required();
  replay->add_option("--templates", replay_opts.templates, "Template overrides used by the original run");
  replay->add_option("--state-out", replay_opts.state_out, "Write the reconstructed state here");

  StatsOptions stats_opts;
  auto* stats = app.add_subcommand("stats", "Survey statistics");
  stats->require_subcommand(1);
  auto* report = stats->add_subcommand("report", "Mean (SD) table per group");
  report->add_option("dataset", stats_opts.dataset, "Ratings (.csv or .json)")->required();
  report->add_option("--group", stats_opts.groups, "Row as label=condition[@genre_group]; repeatable");
  report->add_option("--compare", stats_opts.compares, "Wilcoxon test A,B[,measure[,genre_group]]; repeatable");
  report->add_option("--method", stats_opts.method, "auto, exact or normal");
  report->add_flag("--sample-sd", stats_opts.sample_sd, "Divide by n-1 instead of n");
  report->add_flag("--json", stats_opts.json_out, "JSON output");
  auto* compare = stats->add_subcommand("compare", "Wilcoxon signed-rank test between two conditions");
  compare->add_option("dataset", stats_opts.dataset, "Ratings (.csv or .json)")->required();
  compare->add_option("--a", stats_opts.a, "First condition")->required();
  compare->add_option("--b", stats_opts.b, "Second condition")->required();
  compare->add_option("--group", stats_opts.group, "Restrict to participants in this genre group");
  compare->add_option("--measure", stats_opts.measure, "aggregate, holistic or a criterion name")->capture_default_str();
  compare->add_option("--method", stats_opts.method, "auto, exact or normal");
  compare->add_flag("--json", stats_opts.json_out, "JSON output");

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--config", serve_opts.config, "Service config JSON");
  serve->add_option("--listen", serve_opts.listen, "host:port");
  serve->add_option("--session-dir", serve_opts.session_dir, "Session store directory");
  serve->add_option("--script", serve_opts.script, "Use a scripted backend");
  serve->add_option("--templates", serve_opts.templates, "Directory of prompt template overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto logger = spdlog::get("storykg");
  if (!logger) logger = spdlog::stderr_color_mt("storykg");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  std::string name = "storykg";
  try {
    if (run->parsed()) {
      name += " run";
      return cmd_run(run_opts, out);
    }
    if (replay->parsed()) {
      name += " replay";
      return cmd_replay(replay_opts, out);
    }
    if (report->parsed()) {
      name += " stats report";
      return cmd_stats_report(stats_opts, out);
    }
    if (compare->parsed()) {
      name += " stats compare";
      return cmd_stats_compare(stats_opts, out);
    }
    if (serve->parsed()) {
      name += " serve";
      return cmd_serve(serve_opts, out);
    }
  } catch (const UsageError& e) {
    err << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorruptLogError& e) {
    err << name << ": CorruptLog at record " << e.record_index() << ": " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const Error& e) {
    err << name << ": " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::CorruptLog ? kExitCorrupt : kExitFailure;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace storykg::cli
