#include "storykg/textgen/http_backend.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

namespace storykg::textgen {

namespace {

struct Attempt {
  std::optional<GenerationResult> result;
  ErrorCode code = ErrorCode::BackendUnavailable;
  std::string message;
  bool retryable = false;
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::pair<std::time_t, std::time_t> split_seconds(double seconds) {
  auto whole = static_cast<std::time_t>(seconds);
  auto usec = static_cast<std::time_t>(std::llround((seconds - static_cast<double>(whole)) * 1e6));
  return {whole, usec};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "endpoint must be an http:// URL");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http") throw Error(ErrorCode::InvalidArgument, "unsupported endpoint scheme '" + scheme + "'");
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
  if (scheme_host_port_.size() <= scheme_end + 3) throw Error(ErrorCode::InvalidArgument, "endpoint has no host");
  if (config_.max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be non-negative");
  if (!config_.auth_env.empty()) {
    if (const char* value = std::getenv(config_.auth_env.c_str())) secret_ = value;
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const { return "http:" + config_.model; }

std::string HttpBackend::redact(std::string text) const {
  if (secret_.empty()) return text;
  for (auto pos = text.find(secret_); pos != std::string::npos; pos = text.find(secret_, pos)) {
    text.replace(pos, secret_.size(), "***");
  }
  return text;
}

GenerationResult HttpBackend::complete(const GenerationRequest& request) {
  nlohmann::json body{
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"max_tokens", request.max_output_tokens},
      {"temperature", request.temperature},
  };
  const auto payload = body.dump();

  httplib::Headers headers;
  if (!secret_.empty()) headers.emplace("Authorization", "Bearer " + secret_);

  auto attempt_once = [&]() -> Attempt {
    httplib::Client client(scheme_host_port_);
    auto [sec, usec] = split_seconds(config_.timeout_seconds);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      auto err = res.error();
      bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
      return {std::nullopt, timed_out ? ErrorCode::Timeout : ErrorCode::BackendUnavailable,
              "transport error: " + httplib::to_string(err), true};
    }
    if (res->status < 200 || res->status >= 300) {
      auto msg = "HTTP " + std::to_string(res->status) + ": " + redact(res->body);
      if (retryable_status(res->status)) return {std::nullopt, ErrorCode::BackendUnavailable, msg, true};
      return {std::nullopt, ErrorCode::BackendRejected, msg, false};
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      return {std::nullopt, ErrorCode::BackendRejected, "reply is not valid JSON: " + redact(res->body), false};
    }
    const nlohmann::json* content = nullptr;
    if (reply.is_object() && reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
      const auto& choice = reply["choices"][0];
      if (choice.is_object() && choice.contains("message") && choice["message"].is_object() &&
          choice["message"].contains("content") && choice["message"]["content"].is_string()) {
        content = &choice["message"]["content"];
      }
    }
    if (!content) {
      return {std::nullopt, ErrorCode::BackendRejected, "reply has no choices[0].message.content string", false};
    }
    GenerationResult result;
    result.text = content->get<std::string>();
    result.backend_id = id();
    if (reply.contains("usage") && reply["usage"].is_object()) {
      const auto& usage = reply["usage"];
      if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_unsigned()) {
        result.usage.prompt_tokens = usage["prompt_tokens"].get<std::size_t>();
      }
      if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_unsigned()) {
        result.usage.output_tokens = usage["completion_tokens"].get<std::size_t>();
      }
    }
    if (result.usage.output_tokens == 0 && !result.text.empty()) {
      // Endpoints that omit usage still have to satisfy "empty text iff zero tokens".
      result.usage.output_tokens = 1;
    }
    return {std::move(result), ErrorCode::BackendUnavailable, {}, false};
  };

  auto delay = config_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    auto outcome = attempt_once();
    if (outcome.result) return std::move(*outcome.result);
    if (!outcome.retryable || attempt >= config_.max_retries) throw Error(outcome.code, outcome.message);
    spdlog::warn("generator call failed ({}), retry {}/{} in {} ms", outcome.message, attempt + 1,
                 config_.max_retries, delay.count());
    std::this_thread::sleep_for(delay);
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * config_.backoff_factor));
  }
}

std::shared_ptr<HttpBackend> http_backend(HttpBackendConfig config) {
  return std::make_shared<HttpBackend>(std::move(config));
}

}  // namespace storykg::textgen
