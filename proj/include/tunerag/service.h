#pragma once

/**
 * @file service.h
 * @brief Application config, startup wiring and the JSON HTTP API.
 */

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tunerag/corpus.h"
#include "tunerag/dialogue.h"
#include "tunerag/llm.h"

namespace httplib {
class Server;
}

namespace tunerag::service {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One model profile. `backend` is "http" or "mock"; a mock answers from
/// `script` (in order) or from `rules` (first rule whose needle occurs in the
/// last message wins).
struct BackendSpec {
  std::string backend = "http";
  llm::ModelConfig model;
  int concurrency = 4;
  std::vector<std::string> script;
  std::vector<std::pair<std::string, std::string>> rules;
};

struct AppConfig {
  std::filesystem::path index_path;
  BackendSpec retrieval_model;
  BackendSpec composer_model;
  std::size_t k = 3;
  /// Empty paths select the built-in templates.
  std::filesystem::path composer_system_template;
  std::filesystem::path turn_template;
  std::filesystem::path retrieval_template;
  std::filesystem::path reprompt_template;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::milliseconds request_timeout{120000};
  std::size_t max_sessions = 100;
  std::size_t max_turns = 50;
  std::string cors_origin;               ///< Empty disables CORS headers.
  std::filesystem::path snapshot_path;   ///< Sessions written here on shutdown when set.

  /// Relative paths resolve against `base_dir`. Throws ConfigError.
  static AppConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir);
  static AppConfig load(const std::filesystem::path& path);
};

std::shared_ptr<llm::ChatBackend> make_backend(const BackendSpec& spec);

/// Loaded index, backends and dialogue engine.
struct App {
  AppConfig config;
  std::shared_ptr<const CorpusIndex> index;
  std::shared_ptr<llm::ChatBackend> retrieval_backend;
  std::shared_ptr<llm::ChatBackend> composer_backend;
  std::unique_ptr<dialogue::DialogueEngine> engine;
};

/// Throws CorpusError, MissingTemplate or ConfigError.
App build_app(const AppConfig& config);

/// Writes every session as a JSON array.
void write_snapshot(const App& app, const std::filesystem::path& path);

class HttpService {
 public:
  /// `log` receives one JSON line per turn; nullptr disables logging.
  explicit HttpService(App& app, std::ostream* log = nullptr);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); in-flight requests finish first. Writes the
  /// snapshot when configured.
  void run();
  void stop();
  void wait_until_ready();

 private:
  void install_routes();
  void log_line(const std::string& line);

  App& app_;
  std::ostream* log_;
  std::mutex log_mutex_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace tunerag::service
