#include "storykg/pipeline/node_lines.hpp"

#include "strings.hpp"

namespace storykg::pipeline {

namespace {

const kg::NodeType* match_type(std::string_view name, const std::vector<kg::NodeType>& type_set) {
  for (const auto& t : type_set) {
    if (detail::iequals(t.name(), name)) return &t;
  }
  for (const auto& t : type_set) {
    const auto& full = t.name();
    if (full.size() == name.size() + 1 && (full.back() == 's' || full.back() == 'S') &&
        detail::iequals(std::string_view(full).substr(0, name.size()), name)) {
      return &t;
    }
  }
  return nullptr;
}

}  // namespace

NodeLineParse parse_node_lines(std::string_view text, const std::vector<kg::NodeType>& type_set) {
  NodeLineParse out;
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = detail::trim(lines[i]);
    if (line.substr(0, 2) == "- " || line.substr(0, 2) == "* ") line = detail::trim(line.substr(2));
    if (line.empty()) continue;
    auto diag = [&](std::string reason) {
      out.diagnostics.push_back(kg::LineDiagnostic{i + 1, 0, std::string(lines[i]), std::move(reason)});
    };

    auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      diag("expected 'type: name'");
      continue;
    }
    const auto* type = match_type(detail::trim(line.substr(0, colon)), type_set);
    if (!type) {
      diag("unknown type '" + std::string(detail::trim(line.substr(0, colon))) + "'");
      continue;
    }
    auto rest = line.substr(colon + 1);
    auto bar = rest.find('|');
    auto name = detail::trim(rest.substr(0, bar));
    if (name.empty()) {
      diag("node name is empty");
      continue;
    }

    kg::Node node{std::string(name), *type, {}};
    bool ok = true;
    while (bar != std::string_view::npos) {
      auto next = rest.find('|', bar + 1);
      auto attr = detail::trim(rest.substr(bar + 1, next == std::string_view::npos ? std::string_view::npos : next - bar - 1));
      bar = next;
      auto eq = attr.find('=');
      auto key = eq == std::string_view::npos ? std::string_view{} : detail::trim(attr.substr(0, eq));
      if (key.empty()) {
        diag("expected 'attribute = value' after '|'");
        ok = false;
        break;
      }
      node.attributes[std::string(key)] = std::string(detail::trim(attr.substr(eq + 1)));
    }
    if (ok) out.nodes.push_back(std::move(node));
  }
  return out;
}

std::string serialize_nodes(const kg::NodeRegistry& registry) {
  std::string out;
  for (const auto& node : registry.nodes()) {
    out.append(node.type.name()).append(": ").append(node.name);
    for (const auto& [key, value] : node.attributes) out.append(" | ").append(key).append(" = ").append(value);
    out.push_back('\n');
  }
  return out;
}

}  // namespace storykg::pipeline
