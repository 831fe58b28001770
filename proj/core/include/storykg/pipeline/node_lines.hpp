#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "storykg/kg/grammar.hpp"
#include "storykg/kg/types.hpp"

namespace storykg::pipeline {

// Node lines, as produced by the node-listing prompts:
//
//   type: name
//   type: name | attribute = value | attribute = value
//
// The type is matched case-insensitively against `type_set`; a singular form
// ("character" for "characters") is accepted.
struct NodeLineParse {
  std::vector<kg::Node> nodes;
  std::vector<kg::LineDiagnostic> diagnostics;
};

NodeLineParse parse_node_lines(std::string_view text, const std::vector<kg::NodeType>& type_set);

std::string serialize_nodes(const kg::NodeRegistry& registry);

}  // namespace storykg::pipeline
