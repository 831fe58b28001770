#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "storykg/pipeline/state.hpp"
#include "storykg/textgen/prompt.hpp"

namespace storykg::pipeline {

struct ReplayReport {
  std::optional<PipelineState> state;  // empty when the log holds no committed operation
  bool match = true;
  std::vector<std::string> mismatches;
  std::size_t committed_ops = 0;
  std::size_t ignored_records = 0;  // trailing records of an unfinished operation
  std::uint64_t next_seq = 0;       // seq to continue appending at
  std::string final_hash;           // hash of the reconstructed state
  std::string stored_hash;          // state_hash of the last commit record
};

// Re-executes every committed operation against a scripted backend loaded
// with that operation's recorded generator outputs, and checks each result
// against the recorded prompts, scene texts and state hashes.
ReplayReport replay(const std::vector<nlohmann::json>& records, std::shared_ptr<const textgen::TemplateSet> templates);

}  // namespace storykg::pipeline
