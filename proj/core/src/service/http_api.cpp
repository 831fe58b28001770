#include "storykg/service/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>

#include "storykg/kg/json.hpp"

namespace storykg::service {

using nlohmann::json;

namespace {

constexpr auto kEventPoll = std::chrono::milliseconds(500);
constexpr int kKeepaliveEvery = 30;  // polls between keepalive comments

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& err) { send_json(res, http_status(err.code()), error_body(err)); }

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::InvalidArgument, "request body is not valid JSON");
  return body;
}

std::string sse_event(std::string_view name, const json& data) {
  return "event: " + std::string(name) + "\ndata: " + data.dump() + "\n\n";
}

json event_summary(const SessionView& v) {
  const auto& st = *v.state;
  json j{{"id", v.id},
         {"phase", pipeline::to_string(st.phase)},
         {"busy", v.busy},
         {"version", v.version},
         {"scenes", st.scenes.size()},
         {"graph_size", st.graph.size()}};
  if (!st.scenes.empty()) j["generation"] = st.scenes.back().generation;
  j["last_error"] = v.last_error ? json{{"code", storykg::to_string(v.last_error->code)}, {"message", v.last_error->message}}
                                 : json(nullptr);
  return j;
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::WrongPhase:
      return 409;
    case ErrorCode::Busy:
      return 429;
    case ErrorCode::MalformedEntry:
    case ErrorCode::UnknownEntryId:
    case ErrorCode::InvalidField:
    case ErrorCode::InvalidSpec:
    case ErrorCode::MissingPlaceholder:
      return 422;
    case ErrorCode::InvalidArgument:
      return 400;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::BackendRejected:
    case ErrorCode::ExtractionEmpty:
    case ErrorCode::EmptyScene:
      return 502;
    case ErrorCode::Timeout:
      return 504;
    default:
      return 500;
  }
}

json error_body(const Error& err) {
  json e{{"code", storykg::to_string(err.code())}, {"message", err.what()}};
  if (const auto* rejected = dynamic_cast<const EditRejected*>(&err)) {
    json diags = json::array();
    for (const auto& d : rejected->diagnostics()) {
      diags.push_back(json{{"command", d.command_index}, {"field", d.field}, {"message", d.message}});
    }
    e["diagnostics"] = std::move(diags);
  }
  if (const auto* malformed = dynamic_cast<const MalformedEntryError*>(&err)) {
    e["diagnostics"] = json::array({json{{"line", malformed->line()}, {"offset", malformed->offset()},
                                         {"message", malformed->reason()}}});
  }
  return json{{"error", std::move(e)}};
}

struct ApiServer::Impl {
  SessionManager& sessions;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  explicit Impl(SessionManager& s) : sessions(s) { routes(); }

  template <typename F>
  auto guarded(F f) {
    return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& err) {
        send_error(res, err);
      }
    };
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const Error& err) {
        send_error(res, err);
        return;
      } catch (const std::exception& e) {
        spdlog::error("unhandled exception in request: {}", e.what());
      } catch (...) {
      }
      send_json(res, 500, json{{"error", {{"code", "Internal"}, {"message", what}}}});
    });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto id = sessions.create(parse_body(req));
      auto view = sessions.get(id);
      send_json(res, 201, json{{"id", id}, {"phase", pipeline::to_string(view.state->phase)}});
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, projection(sessions.get(req.matches[1])));
    }));

    server.Get(R"(/sessions/([^/]+)/graph)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto view = sessions.get(req.matches[1]);
      send_json(res, 200, json{{"graph", kg::to_json(view.state->graph)}, {"size", view.state->graph.size()},
                               {"nodes", kg::to_json(view.state->registry)}});
    }));

    server.Post(R"(/sessions/([^/]+)/edits)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      sessions.get(id);  // NotFound before body validation
      auto edits = kg::edit_set_from_json(parse_body(req));
      edits.author = kg::EditAuthor::User;
      auto view = sessions.submit_edits(id, edits);
      send_json(res, 200, json{{"graph", kg::to_json(view.state->graph)}, {"size", view.state->graph.size()},
                               {"phase", pipeline::to_string(view.state->phase)}});
    }));

    server.Post(R"(/sessions/([^/]+)/regenerate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      sessions.regenerate(id);
      send_json(res, 202, json{{"accepted", true}, {"id", id}});
    }));

    server.Post(R"(/sessions/([^/]+)/advance)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      sessions.advance(id);
      send_json(res, 202, json{{"accepted", true}, {"id", id}});
    }));

    server.Get(R"(/sessions/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto view = sessions.get(req.matches[1]);
      auto format = req.has_param("format") ? req.get_param_value("format") : std::string("text");
      if (format == "text") {
        res.status = 200;
        res.set_content(pipeline::export_text(*view.state), "text/plain; charset=utf-8");
      } else if (format == "json") {
        send_json(res, 200, pipeline::to_json(*view.state));
      } else {
        throw Error(ErrorCode::InvalidArgument, "format must be text or json");
      }
    }));

    server.Get(R"(/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      auto first = sessions.get(id);
      auto seen = std::make_shared<std::uint64_t>(0);
      auto sent_first = std::make_shared<bool>(false);
      auto idle_polls = std::make_shared<int>(0);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, id, seen, sent_first, idle_polls](
                                                                 std::size_t, httplib::DataSink& sink) {
        if (stopping) return false;
        SessionView view;
        try {
          view = *sent_first ? sessions.wait_change(id, *seen, kEventPoll) : sessions.get(id);
        } catch (const Error&) {
          return false;
        }
        if (!*sent_first || view.version > *seen) {
          *sent_first = true;
          *seen = view.version;
          *idle_polls = 0;
          auto msg = sse_event("state", event_summary(view));
          if (!sink.write(msg.data(), msg.size())) return false;
          if (view.state->phase.kind == pipeline::Phase::Kind::Finished && !view.busy) {
            auto done = sse_event("finished", json{{"id", id}});
            sink.write(done.data(), done.size());
            sink.done();
          }
        } else if (++*idle_polls >= kKeepaliveEvery) {
          *idle_polls = 0;
          static constexpr std::string_view ka = ": keepalive\n\n";
          if (!sink.write(ka.data(), ka.size())) return false;
        }
        return true;
      });
    }));
  }
};

ApiServer::ApiServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::StorageFailure, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::StorageFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::serve() { impl_->server.listen_after_bind(); }

void ApiServer::start() {
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void ApiServer::stop() {
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace storykg::service
