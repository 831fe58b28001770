#include "storykg/service/config.hpp"

#include <fstream>
#include <sstream>

#include "storykg/error.hpp"

namespace storykg::service {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + std::string(what) + " " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " " + path.string() + " is not JSON");
  return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("config key '") + key + "' has the wrong type");
  }
}

textgen::ScriptedResponse script_item(const json& item) {
  if (item.is_string()) return item.get<std::string>();
  if (item.is_object() && item.contains("error")) {
    ErrorCode code = ErrorCode::BackendUnavailable;
    if (!parse_error_code(item.value("error", ""), code)) {
      throw Error(ErrorCode::InvalidArgument, "unknown error code in script: " + item.value("error", ""));
    }
    return textgen::ScriptedFailure{code, item.value("message", "")};
  }
  throw Error(ErrorCode::InvalidArgument, "script items must be strings or {\"error\": ...} objects");
}

}  // namespace

ServiceConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  ServiceConfig cfg;
  if (auto listen = get_or<std::string>(j, "listen", ""); !listen.empty()) {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "listen must be host:port");
    cfg.host = listen.substr(0, colon);
    try {
      cfg.port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad port in listen '" + listen + "'");
    }
  }
  cfg.session_dir = get_or<std::string>(j, "session_dir", cfg.session_dir.string());
  if (auto t = get_or<std::string>(j, "template_dir", ""); !t.empty()) cfg.template_dir = t;

  if (j.contains("backend")) {
    const auto& b = j["backend"];
    if (!b.is_object()) throw Error(ErrorCode::InvalidArgument, "backend must be an object");
    auto kind = get_or<std::string>(b, "kind", "scripted");
    if (kind == "scripted") {
      cfg.backend.kind = BackendConfig::Kind::Scripted;
      cfg.backend.script = get_or<std::string>(b, "script", "");
    } else if (kind == "http") {
      cfg.backend.kind = BackendConfig::Kind::Http;
      auto& h = cfg.backend.http;
      h.endpoint = get_or<std::string>(b, "endpoint", "");
      h.model = get_or<std::string>(b, "model", "");
      h.auth_env = get_or<std::string>(b, "auth_env", "");
      h.timeout_seconds = get_or<double>(b, "timeout_seconds", h.timeout_seconds);
      h.max_retries = get_or<int>(b, "max_retries", h.max_retries);
      h.initial_backoff = std::chrono::milliseconds(get_or<long>(b, "initial_backoff_ms", h.initial_backoff.count()));
      h.backoff_factor = get_or<double>(b, "backoff_factor", h.backoff_factor);
      if (h.endpoint.empty()) throw Error(ErrorCode::InvalidArgument, "http backend needs an endpoint");
    } else {
      throw Error(ErrorCode::InvalidArgument, "backend kind must be 'scripted' or 'http'");
    }
  }

  if (j.contains("defaults")) {
    const auto& d = j["defaults"];
    cfg.defaults.scene_count = get_or<int>(d, "scene_count", cfg.defaults.scene_count);
    cfg.defaults.query_cap = get_or<std::size_t>(d, "query_cap", cfg.defaults.query_cap);
    cfg.defaults.edit_mode = get_or<bool>(d, "edit_mode", cfg.defaults.edit_mode);
    if (d.contains("type_set")) {
      std::vector<kg::NodeType> types;
      for (const auto& name : d["type_set"]) {
        if (!name.is_string()) throw Error(ErrorCode::InvalidArgument, "type_set entries must be strings");
        types.emplace_back(name.get<std::string>());
      }
      kg::validate_type_set(types);
      cfg.defaults.type_set = std::move(types);
    }
  }
  return cfg;
}

ServiceConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path, "config")); }

std::shared_ptr<textgen::GeneratorBackend> script_from_json(const json& j) {
  if (j.is_array()) {
    std::vector<textgen::ScriptedResponse> items;
    for (const auto& item : j) items.push_back(script_item(item));
    return std::make_shared<textgen::ScriptedBackend>(std::move(items));
  }
  if (j.is_object()) {
    auto routed = std::make_shared<textgen::RoutedScriptBackend>();
    for (const auto& [key, list] : j.items()) {
      auto id = textgen::parse_template_id(key);
      if (!id) throw Error(ErrorCode::InvalidArgument, "unknown template id in script: " + key);
      if (!list.is_array()) throw Error(ErrorCode::InvalidArgument, "script for " + key + " must be an array");
      for (const auto& item : list) {
        auto r = script_item(item);
        if (auto* text = std::get_if<std::string>(&r)) {
          routed->push(*id, std::move(*text));
        } else {
          auto& f = std::get<textgen::ScriptedFailure>(r);
          routed->push_failure(*id, f.code, f.message);
        }
      }
    }
    return routed;
  }
  throw Error(ErrorCode::InvalidArgument, "script must be a JSON array or object");
}

std::shared_ptr<textgen::GeneratorBackend> load_script(const std::filesystem::path& path) {
  return script_from_json(read_json_file(path, "script"));
}

std::shared_ptr<textgen::GeneratorBackend> make_backend(const BackendConfig& config) {
  if (config.kind == BackendConfig::Kind::Http) return textgen::http_backend(config.http);
  if (config.script.empty()) return std::make_shared<textgen::ScriptedBackend>();
  return load_script(config.script);
}

void ensure_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::StorageFailure, "session directory " + dir.string() + " cannot be created");
  }
  auto probe = dir / ".write-probe";
  {
    std::ofstream out(probe, std::ios::binary | std::ios::trunc);
    out << "ok";
    if (!out) throw Error(ErrorCode::StorageFailure, "session directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace storykg::service
