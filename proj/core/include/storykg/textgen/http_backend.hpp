#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "storykg/textgen/backend.hpp"

namespace storykg::textgen {

struct HttpBackendConfig {
  // Full URL of the chat-completions route, e.g.
  // "http://127.0.0.1:8000/v1/chat/completions". Only plain http is supported.
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the bearer token. Empty or unset
  // means no Authorization header.
  std::string auth_env;
  double timeout_seconds = 120.0;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
};

// Talks to an OpenAI-style chat-completions endpoint with a single user
// message per request. Transport failures and 408/429/5xx replies are retried
// with exponential backoff; other non-2xx replies raise BackendRejected.
class HttpBackend final : public GeneratorBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ~HttpBackend() override;

  GenerationResult complete(const GenerationRequest& request) override;
  std::string id() const override;

  bool has_auth() const noexcept { return !secret_.empty(); }

 private:
  std::string redact(std::string text) const;

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string secret_;
};

std::shared_ptr<HttpBackend> http_backend(HttpBackendConfig config);

}  // namespace storykg::textgen
