#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tunerag/prompt_template.h"
#include "tunerag/service.h"

namespace tunerag::service {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

BackendSpec parse_backend(const json& profiles, const char* name, double default_temperature) {
  if (!profiles.contains(name) || !profiles[name].is_object()) {
    throw ConfigError(std::string("config needs models.") + name);
  }
  const json& p = profiles[name];
  BackendSpec spec;
  spec.backend = get_or<std::string>(p, "backend", "http");
  spec.model.endpoint = get_or<std::string>(p, "endpoint", "");
  spec.model.model = get_or<std::string>(p, "model", "");
  spec.model.temperature = get_or<double>(p, "temperature", default_temperature);
  spec.model.max_tokens = get_or<int>(p, "max_tokens", 1024);
  spec.model.timeout = std::chrono::milliseconds(get_or<long long>(p, "timeout_ms", 60000));
  spec.model.max_retries = get_or<int>(p, "max_retries", 2);
  spec.model.backoff = std::chrono::milliseconds(get_or<long long>(p, "backoff_ms", 500));
  spec.concurrency = get_or<int>(p, "concurrency", 4);
  spec.script = get_or<std::vector<std::string>>(p, "script", {});
  if (p.contains("rules")) {
    if (!p["rules"].is_array()) throw ConfigError(std::string("models.") + name + ".rules must be an array");
    for (const auto& r : p["rules"]) {
      spec.rules.emplace_back(get_or<std::string>(r, "contains", ""), get_or<std::string>(r, "reply", ""));
    }
  }

  const std::string where = std::string("models.") + name;
  if (spec.backend == "http") {
    if (spec.model.endpoint.empty() || spec.model.model.empty()) {
      throw ConfigError(where + " needs endpoint and model for the http backend");
    }
  } else if (spec.backend == "mock") {
    if (spec.script.empty() == spec.rules.empty()) throw ConfigError(where + " mock needs exactly one of script or rules");
  } else {
    throw ConfigError(where + ".backend must be \"http\" or \"mock\"");
  }
  if (spec.model.temperature < 0) throw ConfigError(where + ".temperature must be >= 0");
  if (spec.model.max_tokens < 1) throw ConfigError(where + ".max_tokens must be positive");
  if (spec.model.max_retries < 0) throw ConfigError(where + ".max_retries must be >= 0");
  return spec;
}

}  // namespace

AppConfig AppConfig::from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  AppConfig cfg;
  const std::string index = get_or<std::string>(doc, "index", "");
  if (index.empty()) throw ConfigError("config needs \"index\"");
  cfg.index_path = resolve(base_dir, index);

  if (!doc.contains("models") || !doc["models"].is_object()) throw ConfigError("config needs a \"models\" object");
  cfg.retrieval_model = parse_backend(doc["models"], "retrieval_model", 0.0);
  cfg.composer_model = parse_backend(doc["models"], "composer_model", 0.7);

  const json retrieval = doc.value("retrieval", json::object());
  const long long k = get_or<long long>(retrieval, "k", 3);
  if (k < 1) throw ConfigError("retrieval.k must be at least 1");
  cfg.k = static_cast<std::size_t>(k);

  const json templates = doc.value("templates", json::object());
  cfg.composer_system_template = resolve(base_dir, get_or<std::string>(templates, "composer_system", ""));
  cfg.turn_template = resolve(base_dir, get_or<std::string>(templates, "turn", ""));
  cfg.retrieval_template = resolve(base_dir, get_or<std::string>(templates, "retrieval_system", ""));
  cfg.reprompt_template = resolve(base_dir, get_or<std::string>(templates, "reprompt", ""));

  const json server = doc.value("server", json::object());
  cfg.host = get_or<std::string>(server, "host", cfg.host);
  cfg.port = get_or<int>(server, "port", cfg.port);
  cfg.request_timeout = std::chrono::milliseconds(get_or<long long>(server, "request_timeout_ms", 120000));
  cfg.max_sessions = get_or<std::size_t>(server, "max_sessions", cfg.max_sessions);
  cfg.max_turns = get_or<std::size_t>(server, "max_turns", cfg.max_turns);
  cfg.cors_origin = get_or<std::string>(server, "cors_origin", "");
  cfg.snapshot_path = resolve(base_dir, get_or<std::string>(server, "snapshot", ""));
  if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("server.port out of range");
  return cfg;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path.parent_path());
}

std::shared_ptr<llm::ChatBackend> make_backend(const BackendSpec& spec) {
  if (spec.backend == "mock") {
    if (!spec.script.empty()) return llm::MockBackend::scripted(spec.script);
    std::vector<llm::MockBackend::Rule> rules;
    for (const auto& [needle, reply] : spec.rules) rules.push_back(llm::MockBackend::when_contains(needle, reply));
    return llm::MockBackend::matching(std::move(rules));
  }
  return std::make_shared<llm::HttpBackend>(spec.concurrency);
}

App build_app(const AppConfig& config) {
  App app;
  app.config = config;
  app.index = std::make_shared<const CorpusIndex>(load_index(config.index_path));
  app.retrieval_backend = make_backend(config.retrieval_model);
  app.composer_backend = make_backend(config.composer_model);

  dialogue::EngineConfig engine_cfg;
  engine_cfg.retrieval.k = config.k;
  engine_cfg.retrieval_model = config.retrieval_model.model;
  engine_cfg.composer_model = config.composer_model.model;
  engine_cfg.max_turns = config.max_turns;
  engine_cfg.max_sessions = config.max_sessions;
  auto load_or_keep = [](const std::filesystem::path& p, std::string& slot) {
    if (!p.empty()) slot = load_template(p);
  };
  load_or_keep(config.composer_system_template, engine_cfg.templates.composer_system);
  load_or_keep(config.turn_template, engine_cfg.templates.turn);
  load_or_keep(config.retrieval_template, engine_cfg.templates.retrieval_system);
  load_or_keep(config.reprompt_template, engine_cfg.templates.reprompt);

  app.engine = std::make_unique<dialogue::DialogueEngine>(app.index, app.retrieval_backend, app.composer_backend,
                                                          std::move(engine_cfg));
  return app;
}

}  // namespace tunerag::service
