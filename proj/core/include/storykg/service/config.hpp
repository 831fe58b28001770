#pragma once

#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "storykg/kg/types.hpp"
#include "storykg/textgen/backend.hpp"
#include "storykg/textgen/http_backend.hpp"

namespace storykg::service {

struct BackendConfig {
  enum class Kind { Scripted, Http };
  Kind kind = Kind::Scripted;
  std::filesystem::path script;  // scripted only
  textgen::HttpBackendConfig http;
};

// Applied to specs that leave these fields out.
struct StoryDefaults {
  int scene_count = 5;
  std::size_t query_cap = 40;
  std::vector<kg::NodeType> type_set = kg::default_type_set();
  bool edit_mode = true;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path session_dir = "sessions";
  BackendConfig backend;
  std::optional<std::filesystem::path> template_dir;
  StoryDefaults defaults;
};

// Unknown keys are ignored; malformed values raise InvalidArgument.
//
//   {"listen": "127.0.0.1:8080", "session_dir": "...", "template_dir": "...",
//    "backend": {"kind": "http", "endpoint": "...", "model": "...",
//                "auth_env": "STORYKG_API_KEY", "timeout_seconds": 120,
//                "max_retries": 3},
//    "defaults": {"scene_count": 5, "query_cap": 40, "type_set": [...],
//                 "edit_mode": true}}
ServiceConfig config_from_json(const nlohmann::json& j);
ServiceConfig load_config(const std::filesystem::path& path);

// Script files: a JSON array of outputs served in order, or an object mapping
// template ids to arrays, served per template. An element may be
// {"error": "<ErrorCode>", "message": "..."} to script a failure.
std::shared_ptr<textgen::GeneratorBackend> load_script(const std::filesystem::path& path);
std::shared_ptr<textgen::GeneratorBackend> script_from_json(const nlohmann::json& j);

std::shared_ptr<textgen::GeneratorBackend> make_backend(const BackendConfig& config);

// Throws StorageFailure unless `dir` exists (or can be created) and accepts a
// new file.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace storykg::service
