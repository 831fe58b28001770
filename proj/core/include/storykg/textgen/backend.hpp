#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "storykg/error.hpp"
#include "storykg/textgen/prompt.hpp"

namespace storykg::textgen {

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t output_tokens = 0;
  friend bool operator==(const Usage&, const Usage&) = default;
};

struct GenerationResult {
  std::string text;
  Usage usage;
  std::string backend_id;
};

// The model boundary. Implementations must be safe to share between threads;
// any call may be slow and may throw storykg::Error with BackendUnavailable,
// BackendRejected or Timeout.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual GenerationResult complete(const GenerationRequest& request) = 0;
  virtual std::string id() const = 0;
};

// Validates the request (InvalidArgument) and forwards it to the backend.
GenerationResult complete(GeneratorBackend& backend, const GenerationRequest& request);

// A canned failure in a script.
struct ScriptedFailure {
  ErrorCode code = ErrorCode::BackendUnavailable;
  std::string message;
};

using ScriptedResponse = std::variant<std::string, ScriptedFailure>;

// Replays responses in order without looking at the request, and records every
// request it receives. Exhaustion raises BackendUnavailable.
class ScriptedBackend final : public GeneratorBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<std::string> responses);
  explicit ScriptedBackend(std::vector<ScriptedResponse> responses);

  GenerationResult complete(const GenerationRequest& request) override;
  std::string id() const override { return "scripted"; }

  void push(std::string text);
  void push_failure(ErrorCode code, std::string message = {});

  std::vector<GenerationRequest> requests() const;
  std::size_t call_count() const;
  std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::deque<ScriptedResponse> queue_;
  std::vector<GenerationRequest> log_;
};

std::shared_ptr<ScriptedBackend> scripted_backend(std::vector<std::string> responses);

// Keeps one replay queue per template id so that a single script serves runs
// whose call sequences differ (for example the two arms of an ablation). The
// request's template id selects the queue; its content is never inspected.
class RoutedScriptBackend final : public GeneratorBackend {
 public:
  RoutedScriptBackend() = default;

  GenerationResult complete(const GenerationRequest& request) override;
  std::string id() const override { return "scripted-routed"; }

  void push(TemplateId id, std::string text);
  void push_failure(TemplateId id, ErrorCode code, std::string message = {});

  std::vector<GenerationRequest> requests() const;
  std::size_t remaining(TemplateId id) const;

 private:
  mutable std::mutex mutex_;
  std::map<TemplateId, std::deque<ScriptedResponse>> queues_;
  std::vector<GenerationRequest> log_;
};

}  // namespace storykg::textgen
