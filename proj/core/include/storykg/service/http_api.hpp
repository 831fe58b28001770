#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "storykg/error.hpp"
#include "storykg/service/session_manager.hpp"

namespace storykg::service {

// HTTP status for an error code: NotFound 404, WrongPhase 409, Busy 429,
// validation failures 422, malformed request bodies 400, backend failures
// 502/504, storage and anything else 500.
int http_status(ErrorCode code) noexcept;

// {"error": {"code": "...", "message": "...", "diagnostics": [...]}}
nlohmann::json error_body(const Error& err);

// JSON API over a SessionManager:
//
//   POST /sessions                      spec -> 201 {"id", "phase"}
//   GET  /sessions/{id}                 state projection
//   GET  /sessions/{id}/graph           {"graph", "size", "nodes"}
//   POST /sessions/{id}/edits           edit set -> 200 {"graph", "size"}
//   POST /sessions/{id}/regenerate      202, runs in the background
//   POST /sessions/{id}/advance         202, runs in the background
//   GET  /sessions/{id}/events          server-sent events, one per change
//   GET  /sessions/{id}/export?format=text|json
class ApiServer {
 public:
  explicit ApiServer(SessionManager& sessions);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws StorageFailure
  // when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  // serve() on a background thread; returns once the server accepts.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace storykg::service
