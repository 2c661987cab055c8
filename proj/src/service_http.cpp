#include <fstream>
#include <ostream>

#include <httplib.h>

#include "tunerag/json_codec.h"
#include "tunerag/prompt_template.h"
#include "tunerag/retrieval.h"
#include "tunerag/service.h"

namespace tunerag::service {

namespace {

using json_codec::Json;

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, Json{{"code", code}, {"message", message}});
}

/// Parsed JSON object body, or nullopt after sending a 400.
std::optional<nlohmann::json> object_body(const httplib::Request& req, httplib::Response& res) {
  try {
    auto body = nlohmann::json::parse(req.body);
    if (body.is_object()) return body;
  } catch (const nlohmann::json::exception&) {
  }
  send_error(res, 400, "bad_request", "request body must be a JSON object");
  return std::nullopt;
}

/// Upstream failures are summarized; the upstream body is never forwarded.
std::string sanitized(const llm::LlmError& e) {
  std::string msg = "language model request failed: " + llm::to_string(e.kind());
  if (e.kind() == llm::LlmErrorKind::kApi && e.status() != 0) msg += " (HTTP " + std::to_string(e.status()) + ")";
  return msg;
}

}  // namespace

void write_snapshot(const App& app, const std::filesystem::path& path) {
  Json all = Json::array();
  for (const auto& s : app.engine->sessions()) all.push_back(json_codec::to_json(s->view(), *app.index));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
  out << all.dump(2) << '\n';
}

HttpService::HttpService(App& app, std::ostream* log)
    : app_(app), log_(log), server_(std::make_unique<httplib::Server>()) {
  const auto timeout = app_.config.request_timeout;
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  server_->set_read_timeout(secs.count(), usecs.count());
  server_->set_write_timeout(secs.count(), usecs.count());

  app_.engine->set_turn_logger([this](const dialogue::TurnLog& l) {
    Json line;
    line["event"] = "turn";
    line["session"] = l.session_id;
    line["ok"] = l.ok;
    line["tags"] = std::vector<std::string>(l.tags.begin(), l.tags.end());
    line["retrieved"] = l.retrieved_ids;
    line["composer_calls"] = l.composer_calls;
    line["latency_ms"] = l.latency.count();
    if (!l.ok) line["error"] = l.error;
    log_line(line.dump());
  });
  install_routes();
}

HttpService::~HttpService() { app_.engine->set_turn_logger(nullptr); }

void HttpService::log_line(const std::string& line) {
  if (!log_) return;
  std::lock_guard lock(log_mutex_);
  *log_ << line << '\n';
  log_->flush();
}

void HttpService::install_routes() {
  auto& srv = *server_;
  App& app = app_;

  if (!app.config.cors_origin.empty()) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", app.config.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send_error(res, 500, "internal", message);
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) send_error(res, 404, "not_found", "no such route");
    else if (res.status == 405) send_error(res, 405, "method_not_allowed", "method not allowed");
  });

  srv.Get("/healthz", [&app](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"status", "ok"}, {"entries", app.index->size()}});
  });

  srv.Get("/api/corpus/tags", [&app](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json_codec::vocabulary_json(*app.index));
  });

  srv.Post("/api/sessions", [&app](const httplib::Request&, httplib::Response& res) {
    try {
      const auto session = app.engine->new_session();
      send_json(res, 201, Json{{"session_id", session->id()}});
    } catch (const dialogue::SessionLimitReached& e) {
      send_error(res, 503, "session_limit", e.what());
    }
  });

  srv.Get(R"(/api/sessions/([^/]+))", [&app](const httplib::Request& req, httplib::Response& res) {
    const auto session = app.engine->find_session(req.matches[1]);
    if (!session) return send_error(res, 404, "not_found", "unknown session");
    send_json(res, 200, json_codec::to_json(session->view(), *app.index));
  });

  srv.Post(R"(/api/sessions/([^/]+)/messages)", [&app](const httplib::Request& req, httplib::Response& res) {
    const auto session = app.engine->find_session(req.matches[1]);
    if (!session) return send_error(res, 404, "not_found", "unknown session");
    const auto body = object_body(req, res);
    if (!body) return;
    if (!body->contains("text") || !(*body)["text"].is_string() || (*body)["text"].get<std::string>().empty()) {
      return send_error(res, 400, "bad_request", "body needs a non-empty \"text\" string");
    }
    try {
      const auto turn = app.engine->handle_request(*session, (*body)["text"].get<std::string>());
      send_json(res, 200, json_codec::to_json(turn, *app.index));
    } catch (const dialogue::TurnInFlight& e) {
      send_error(res, 409, "turn_in_flight", e.what());
    } catch (const dialogue::TurnLimitExceeded& e) {
      send_error(res, 409, "turn_limit", e.what());
    } catch (const llm::LlmError& e) {
      send_error(res, 502, "upstream_error", sanitized(e));
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "bad_request", e.what());
    }
  });

  srv.Post("/api/validate", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = object_body(req, res);
    if (!body) return;
    if (!body->contains("abc") || !(*body)["abc"].is_string()) {
      return send_error(res, 400, "bad_request", "body needs an \"abc\" string");
    }
    try {
      const auto tune = abc::parse_tune((*body)["abc"].get<std::string>());
      const auto issues = abc::validate(tune);
      bool has_error = false;
      for (const auto& i : issues) has_error |= i.severity == abc::Severity::kError;
      send_json(res, 200, Json{{"valid", !has_error}, {"bars", tune.body.size()}, {"issues", json_codec::to_json(issues)}});
    } catch (const abc::ParseError& e) {
      send_error(res, 422, "parse_error", e.what());
    }
  });

  srv.Post("/api/retrieve", [&app](const httplib::Request& req, httplib::Response& res) {
    const auto body = object_body(req, res);
    if (!body) return;
    retrieval::RetrievalConfig cfg;
    cfg.k = app.config.k;
    if (body->contains("k")) {
      const auto& k = (*body)["k"];
      if (!k.is_number_integer() || k.get<long long>() < 1) return send_error(res, 400, "bad_request", "k must be a positive integer");
      cfg.k = k.get<std::size_t>();
    }
    TagSet tags;
    Json reply = nullptr;
    if (body->contains("tags")) {
      const auto& t = (*body)["tags"];
      if (!t.is_array()) return send_error(res, 400, "bad_request", "tags must be an array of strings");
      for (const auto& item : t) {
        if (!item.is_string()) return send_error(res, 400, "bad_request", "tags must be an array of strings");
        tags.insert(item.get<std::string>());
      }
    } else if (body->contains("text") && (*body)["text"].is_string()) {
      if (!app.index->vocabulary().empty()) {
        try {
          auto extraction = retrieval::extract_tags((*body)["text"].get<std::string>(), app.index->vocabulary(),
                                                    *app.retrieval_backend, app.config.retrieval_model.model,
                                                    app.engine->config().templates.retrieval_system);
          tags = std::move(extraction.tags);
          reply = extraction.raw_reply;
        } catch (const llm::LlmError& e) {
          return send_error(res, 502, "upstream_error", sanitized(e));
        }
      }
    } else {
      return send_error(res, 400, "bad_request", "body needs \"tags\" or \"text\"");
    }
    const auto ranked = retrieval::rank(tags, *app.index, cfg);
    Json out;
    out["tags"] = std::vector<std::string>(tags.begin(), tags.end());
    out["retrieval_reply"] = reply;
    out["candidates"] = json_codec::to_json(ranked, *app.index);
    send_json(res, 200, out);
  });
}

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void HttpService::run() {
  server_->listen_after_bind();
  if (!app_.config.snapshot_path.empty()) write_snapshot(app_, app_.config.snapshot_path);
}

void HttpService::stop() { server_->stop(); }

void HttpService::wait_until_ready() { server_->wait_until_ready(); }

}  // namespace tunerag::service
