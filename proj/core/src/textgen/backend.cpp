#include "storykg/textgen/backend.hpp"

#include "strings.hpp"

namespace storykg::textgen {

namespace {

GenerationResult resolve(const ScriptedResponse& response, const GenerationRequest& request, std::string backend_id) {
  if (const auto* failure = std::get_if<ScriptedFailure>(&response)) {
    throw Error(failure->code, failure->message.empty() ? std::string(storykg::to_string(failure->code))
                                                        : failure->message);
  }
  const auto& text = std::get<std::string>(response);
  return GenerationResult{text, Usage{detail::count_words(request.prompt), detail::count_words(text)},
                          std::move(backend_id)};
}

}  // namespace

GenerationResult complete(GeneratorBackend& backend, const GenerationRequest& request) {
  if (request.max_output_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be at least 1");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
  }
  return backend.complete(request);
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses) {
  for (auto& r : responses) queue_.emplace_back(std::move(r));
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptedResponse> responses)
    : queue_(std::make_move_iterator(responses.begin()), std::make_move_iterator(responses.end())) {}

GenerationResult ScriptedBackend::complete(const GenerationRequest& request) {
  ScriptedResponse next;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    if (queue_.empty()) throw Error(ErrorCode::BackendUnavailable, "scripted backend exhausted");
    next = std::move(queue_.front());
    queue_.pop_front();
  }
  return resolve(next, request, id());
}

void ScriptedBackend::push(std::string text) {
  std::lock_guard lock(mutex_);
  queue_.emplace_back(std::move(text));
}

void ScriptedBackend::push_failure(ErrorCode code, std::string message) {
  std::lock_guard lock(mutex_);
  queue_.emplace_back(ScriptedFailure{code, std::move(message)});
}

std::vector<GenerationRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::shared_ptr<ScriptedBackend> scripted_backend(std::vector<std::string> responses) {
  return std::make_shared<ScriptedBackend>(std::move(responses));
}

GenerationResult RoutedScriptBackend::complete(const GenerationRequest& request) {
  ScriptedResponse next;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    auto& queue = queues_[request.template_id];
    if (queue.empty()) {
      throw Error(ErrorCode::BackendUnavailable,
                  "scripted backend exhausted for " + std::string(to_string(request.template_id)));
    }
    next = std::move(queue.front());
    queue.pop_front();
  }
  return resolve(next, request, id());
}

void RoutedScriptBackend::push(TemplateId id, std::string text) {
  std::lock_guard lock(mutex_);
  queues_[id].emplace_back(std::move(text));
}

void RoutedScriptBackend::push_failure(TemplateId id, ErrorCode code, std::string message) {
  std::lock_guard lock(mutex_);
  queues_[id].emplace_back(ScriptedFailure{code, std::move(message)});
}

std::vector<GenerationRequest> RoutedScriptBackend::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t RoutedScriptBackend::remaining(TemplateId id) const {
  std::lock_guard lock(mutex_);
  auto it = queues_.find(id);
  return it == queues_.end() ? 0 : it->second.size();
}

}  // namespace storykg::textgen
