#include "storykg/textgen/prompt.hpp"

#include <fstream>
#include <sstream>

namespace storykg::textgen {

namespace {

struct TemplateInfo {
  TemplateId id;
  std::string_view name;
  bool kg;
};

constexpr TemplateInfo kInfo[] = {
    {TemplateId::InitializeNodes, "InitializeNodes", true},
    {TemplateId::ExtractKG, "ExtractKG", true},
    {TemplateId::Query, "Query", true},
    {TemplateId::GenerateScene, "GenerateScene", false},
    {TemplateId::Summarize, "Summarize", false},
    {TemplateId::UpdateNodes, "UpdateNodes", true},
    {TemplateId::UpdateKG, "UpdateKG", true},
    {TemplateId::CleanUpLLM, "CleanUpLLM", true},
    {TemplateId::Regenerate, "Regenerate", false},
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

// Returns the placeholder name starting at body[pos] == '{', or empty.
std::string_view placeholder_at(std::string_view body, std::size_t pos) {
  if (pos >= body.size() || body[pos] != '{') return {};
  std::size_t i = pos + 1;
  if (i >= body.size() || !is_ident_start(body[i])) return {};
  while (i < body.size() && is_ident(body[i])) ++i;
  if (i >= body.size() || body[i] != '}') return {};
  return body.substr(pos + 1, i - pos - 1);
}

constexpr std::string_view kWorld =
    "Title: {title}\n"
    "Genre: {genre}\n"
    "Protagonists: {protagonists}\n"
    "Description: {description}\n";

std::string default_body(TemplateId id) {
  std::string world(kWorld);
  switch (id) {
    case TemplateId::InitializeNodes:
      return "List the story elements for a new story.\n\n" + world +
             "\nList the elements of each of these types: {types}.\n"
             "Output one element per line as: type: name\n"
             "Use only the listed types. Output nothing else.\n";
    case TemplateId::ExtractKG:
      return "Build story facts for a new story.\n\n" + world +
             "\nKnown story elements:\n{nodes}\n"
             "Write the relationships that involve the {type} elements.\n"
             "Output one relationship per line as: A -> B -> R : D\n"
             "A and B are element names, R is a short relation from A to B, and D is a one-sentence description.\n"
             "Output nothing else.\n";
    case TemplateId::Query:
      return "Select the story facts that matter for writing the next scene.\n\n"
             "Story facts:\n{graph}\n"
             "Story so far:\n{context}\n\n"
             "Previous scene:\n{previous_scene}\n\n"
             "Copy at most {cap} of the facts above, unchanged, one per line. Output nothing else.\n";
    case TemplateId::GenerateScene:
      return "Write scene {scene_number} of {scene_count} of a story.\n\n" + world +
             "\nStory facts to respect. Each fact links a subject to an object by a relation and adds a "
             "description:\n{graph}\n"
             "Story so far:\n{context}\n\n"
             "Previous scene:\n{previous_scene}\n\n"
             "Write only the prose of scene {scene_number}.\n";
    case TemplateId::Summarize:
      return "Update the running summary of a story with its newest scene.\n\n"
             "Summary so far:\n{context}\n\n"
             "New scene:\n{scene}\n\n"
             "Write the updated summary as one paragraph. Output only the summary.\n";
    case TemplateId::UpdateNodes:
      return "Known story elements:\n{nodes}\n"
             "Scene:\n{scene}\n\n"
             "List elements that first appear in this scene and details that changed for known elements.\n"
             "Use only these types: {types}.\n"
             "Output one per line, either as\n"
             "type: name\n"
             "or as\n"
             "type: name | attribute = value\n"
             "Output nothing else.\n";
    case TemplateId::UpdateKG:
      return "Current story facts:\n{graph}\n"
             "Scene:\n{scene}\n\n"
             "Write the new or changed relationships involving {type} elements that this scene introduces.\n"
             "Output one relationship per line as: A -> B -> R : D\n"
             "Output nothing else.\n";
    case TemplateId::CleanUpLLM:
      return "Story facts:\n{graph}\n"
             "Story so far:\n{context}\n\n"
             "Latest scene:\n{scene}\n\n"
             "Drop facts that are duplicated, contradicted or no longer relevant.\n"
             "Copy the facts to keep, unchanged, one per line as: A -> B -> R : D\n"
             "Output nothing else.\n";
    case TemplateId::Regenerate:
      return "Rewrite scene {scene_number} of {scene_count} of a story so that it agrees with the story facts.\n\n" +
             world +
             "\nStory facts to respect. Each fact links a subject to an object by a relation and adds a "
             "description:\n{graph}\n"
             "Story so far:\n{context}\n\n"
             "Previous scene:\n{previous_scene}\n\n"
             "Current version of scene {scene_number}:\n{current_scene}\n\n"
             "Write only the prose of the rewritten scene.\n";
  }
  return {};
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
  for (const auto& info : kInfo) {
    if (info.id == id) return info.name;
  }
  return "Unknown";
}

std::optional<TemplateId> parse_template_id(std::string_view name) noexcept {
  for (const auto& info : kInfo) {
    if (info.name == name) return info.id;
  }
  return std::nullopt;
}

bool is_kg_template(TemplateId id) noexcept {
  for (const auto& info : kInfo) {
    if (info.id == id) return info.kg;
  }
  return false;
}

std::set<std::string> find_placeholders(std::string_view body) {
  std::set<std::string> out;
  for (std::size_t pos = body.find('{'); pos != std::string_view::npos; pos = body.find('{', pos + 1)) {
    auto name = placeholder_at(body, pos);
    if (!name.empty()) out.emplace(name);
  }
  return out;
}

PromptTemplate PromptTemplate::make(TemplateId id, std::string body) {
  auto required = find_placeholders(body);
  return PromptTemplate{id, std::move(body), std::move(required)};
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
  for (const auto& key : tmpl.required_placeholders) {
    if (bindings.find(key) == bindings.end()) throw MissingPlaceholder(key);
  }
  std::string_view body = tmpl.body;
  std::string out;
  out.reserve(body.size());
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto brace = body.find('{', pos);
    if (brace == std::string_view::npos) {
      out.append(body.substr(pos));
      break;
    }
    out.append(body.substr(pos, brace - pos));
    auto name = placeholder_at(body, brace);
    if (name.empty()) {
      out.push_back('{');
      pos = brace + 1;
      continue;
    }
    auto it = bindings.find(name);
    if (it == bindings.end()) throw MissingPlaceholder(std::string(name));
    out.append(it->second);
    pos = brace + name.size() + 2;
  }
  return out;
}

const std::set<std::string>& available_bindings(TemplateId id) {
  static const std::map<TemplateId, std::set<std::string>> kBindings = [] {
    const std::set<std::string> world = {"title", "genre", "protagonists", "description"};
    auto with = [&](std::set<std::string> extra) {
      extra.insert(world.begin(), world.end());
      return extra;
    };
    return std::map<TemplateId, std::set<std::string>>{
        {TemplateId::InitializeNodes, with({"types"})},
        {TemplateId::ExtractKG, with({"type", "nodes", "types"})},
        {TemplateId::Query, with({"graph", "context", "previous_scene", "cap", "scene_number", "scene_count"})},
        {TemplateId::GenerateScene, with({"graph", "context", "previous_scene", "scene_number", "scene_count"})},
        {TemplateId::Summarize, with({"context", "scene", "scene_number", "scene_count"})},
        {TemplateId::UpdateNodes, with({"nodes", "types", "scene", "scene_number"})},
        {TemplateId::UpdateKG, with({"graph", "type", "scene", "scene_number", "nodes"})},
        {TemplateId::CleanUpLLM, with({"graph", "context", "scene"})},
        {TemplateId::Regenerate,
         with({"graph", "context", "previous_scene", "current_scene", "scene_number", "scene_count"})},
    };
  }();
  return kBindings.at(id);
}

GenerationDefaults default_generation(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::GenerateScene:
    case TemplateId::Regenerate:
      return {0.8, 1200};
    case TemplateId::Summarize:
    case TemplateId::InitializeNodes:
    case TemplateId::UpdateNodes:
      return {0.0, 400};
    case TemplateId::ExtractKG:
    case TemplateId::Query:
    case TemplateId::UpdateKG:
    case TemplateId::CleanUpLLM:
      return {0.0, 800};
  }
  return {};
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  for (auto id : kAllTemplateIds) set.set(PromptTemplate::make(id, default_body(id)));
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  auto set = defaults();
  if (dir.empty()) return set;
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::InvalidArgument, "template directory not found: " + dir.string());
  }
  for (auto id : kAllTemplateIds) {
    auto path = dir / (std::string(to_string(id)) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot read template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    set.set(PromptTemplate::make(id, buf.str()));
  }
  return set;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const { return templates_.at(id); }

void TemplateSet::set(PromptTemplate tmpl) {
  if (tmpl.required_placeholders != find_placeholders(tmpl.body)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(to_string(tmpl.id)) + ": declared placeholders do not match the template body");
  }
  const auto& allowed = available_bindings(tmpl.id);
  for (const auto& key : tmpl.required_placeholders) {
    if (!allowed.count(key)) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(tmpl.id)) + ": placeholder {" + key + "} is never bound for this template");
    }
  }
  templates_.insert_or_assign(tmpl.id, std::move(tmpl));
}

GenerationRequest TemplateSet::make_request(TemplateId id, Bindings bindings) const {
  auto defaults = default_generation(id);
  GenerationRequest req;
  req.template_id = id;
  req.prompt = render_prompt(get(id), bindings);
  req.bindings = std::move(bindings);
  req.max_output_tokens = defaults.max_output_tokens;
  req.temperature = defaults.temperature;
  return req;
}

}  // namespace storykg::textgen
