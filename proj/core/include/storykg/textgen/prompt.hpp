#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "storykg/error.hpp"

namespace storykg::textgen {

enum class TemplateId {
  InitializeNodes,
  ExtractKG,
  Query,
  GenerateScene,
  Summarize,
  UpdateNodes,
  UpdateKG,
  CleanUpLLM,
  Regenerate,
};

inline constexpr std::array<TemplateId, 9> kAllTemplateIds = {
    TemplateId::InitializeNodes, TemplateId::ExtractKG,   TemplateId::Query,
    TemplateId::GenerateScene,   TemplateId::Summarize,   TemplateId::UpdateNodes,
    TemplateId::UpdateKG,        TemplateId::CleanUpLLM,  TemplateId::Regenerate,
};

std::string_view to_string(TemplateId id) noexcept;
std::optional<TemplateId> parse_template_id(std::string_view name) noexcept;

// True for the templates that read or write the knowledge graph.
bool is_kg_template(TemplateId id) noexcept;

using Bindings = std::map<std::string, std::string, std::less<>>;

class MissingPlaceholder : public Error {
 public:
  explicit MissingPlaceholder(std::string key)
      : Error(ErrorCode::MissingPlaceholder, "missing placeholder '" + key + "'"), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Placeholders are "{name}" with name = [A-Za-z_][A-Za-z0-9_]*. Any other use
// of braces is literal text.
std::set<std::string> find_placeholders(std::string_view body);

struct PromptTemplate {
  TemplateId id;
  std::string body;
  std::set<std::string> required_placeholders;

  // required_placeholders is derived from the body.
  static PromptTemplate make(TemplateId id, std::string body);
};

// Single-pass substitution; bound values are never rescanned. Extra bindings
// are ignored. Throws MissingPlaceholder.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

// Placeholders the engine binds for each template.
const std::set<std::string>& available_bindings(TemplateId id);

struct GenerationDefaults {
  double temperature = 0.0;
  int max_output_tokens = 512;
};
GenerationDefaults default_generation(TemplateId id) noexcept;

struct GenerationRequest {
  TemplateId template_id = TemplateId::GenerateScene;
  Bindings bindings;
  std::string prompt;  // rendered body sent to the model
  int max_output_tokens = 512;
  double temperature = 0.0;
};

// One template per id. Construction validates that every template only uses
// placeholders the engine binds for it.
class TemplateSet {
 public:
  static TemplateSet defaults();

  // Defaults overridden by "<TemplateId>.txt" files found in `dir`.
  static TemplateSet load(const std::filesystem::path& dir);

  const PromptTemplate& get(TemplateId id) const;
  void set(PromptTemplate tmpl);

  GenerationRequest make_request(TemplateId id, Bindings bindings) const;

 private:
  TemplateSet() = default;
  std::map<TemplateId, PromptTemplate> templates_;
};

}  // namespace storykg::textgen
