#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <condition_variable>
#include <fstream>

#include "support/service_harness.h"
#include "tunerag/prompt_template.h"

using namespace tunerag;
using namespace tunerag::testing;
using nlohmann::json;

namespace {

service::App mock_app(const TempDir& dir, std::vector<std::string> composer_script = {}, int max_sessions = 100) {
  auto cfg = mock_app_config(dir, std::move(composer_script));
  cfg["server"]["max_sessions"] = max_sessions;
  return service::build_app(service::AppConfig::from_json_text(cfg.dump(), dir.path()));
}

std::string new_session(ServiceHarness& h) {
  auto res = h.client().Post("/api/sessions");
  REQUIRE(res);
  REQUIRE(res->status == 201);
  return body_of(res)["session_id"].get<std::string>();
}

const std::string kCompletionAbc =
    "X:1\nM:6/8\nK:D\n|:A|dAF DAF|GAG Aag|dAF DAF|Ffe e2a|dAF DAF|GAG Aag|faf dBA|Bdf d2:|\n";

/// Blocks inside complete() until released.
class GateBackend : public llm::ChatBackend {
 public:
  llm::ChatMessage complete(std::span<const llm::ChatMessage>, const llm::ModelConfig&) override {
    std::unique_lock lock(mutex_);
    entered_ = true;
    cv_.notify_all();
    cv_.wait(lock, [this] { return released_; });
    return {llm::Role::kAssistant, jig_reply()};
  }
  void wait_entered() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return entered_; });
  }
  void release() {
    std::lock_guard lock(mutex_);
    released_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  bool entered_ = false;
  bool released_ = false;
};

}  // namespace

TEST_CASE("health, vocabulary and unknown routes") {
  TempDir dir;
  ServiceHarness h(mock_app(dir));
  auto health = h.client().Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(body_of(health)["entries"] == 3);

  auto tags = h.client().Get("/api/corpus/tags");
  REQUIRE(tags);
  CHECK(tags->status == 200);
  CHECK(body_of(tags) == json{{"type", {"jig", "reel"}}, {"mode", {"dorian", "major"}}, {"meter", {"4/4", "6/8"}}});

  auto missing = h.client().Get("/api/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(body_of(missing)["code"] == "not_found");
}

TEST_CASE("session lifecycle over HTTP") {
  TempDir dir;
  ServiceHarness h(mock_app(dir));
  const auto id = new_session(h);

  auto fresh = h.client().Get("/api/sessions/" + id);
  REQUIRE(fresh);
  CHECK(fresh->status == 200);
  CHECK(body_of(fresh)["transcript"].size() == 1);
  CHECK(body_of(fresh)["transcript"][0]["role"] == "system");

  auto turn = h.post("/api/sessions/" + id + "/messages", {{"text", kFirstRequest}});
  REQUIRE(turn);
  REQUIRE(turn->status == 200);
  const auto t = body_of(turn);
  REQUIRE(t["retrieved"].size() == 3);
  CHECK(t["retrieved"][0]["id"] == "E1");
  CHECK(t["retrieved"][1]["id"] == "E3");
  CHECK(t["retrieved"][2]["id"] == "E2");
  CHECK(t["retrieved"][0]["similarity"] == "0.5");
  CHECK(t["retrieved"][1]["similarity"] == "0.25");
  CHECK(t["retrieved"][2]["similarity"] == "0.2");
  CHECK(t["retrieved"][0]["matched_tags"] == json{"dorian", "jig"});
  CHECK(t["retrieved"][0]["title"] == "The Dorian Lilt");
  CHECK(t["abc"] == kJigAbc);
  CHECK(t["tune_parsed"] == true);
  CHECK(t["validation"] == json::array());
  CHECK(t["duplicate_of"].is_null());
  CHECK(t["extracted_tags"] == json{"dorian", "jig", "reel"});
  CHECK(t["commentary"].get<std::string>().rfind("This will be a lively Irish reel", 0) == 0);

  auto second = h.post("/api/sessions/" + id + "/messages", {{"text", kSecondRequest}});
  REQUIRE(second);
  CHECK(second->status == 200);

  auto full = h.client().Get("/api/sessions/" + id);
  REQUIRE(full);
  CHECK(body_of(full)["transcript"].size() == 5);
  CHECK(body_of(full)["turns"].size() == 2);
  CHECK(body_of(full)["turns"][1]["user_request"] == kSecondRequest);

  // One structured log line per turn.
  const auto log = h.log_text();
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);
  CHECK(log.find(R"("retrieved":["E1","E3","E2"])") != std::string::npos);
}

TEST_CASE("session errors map to status codes") {
  TempDir dir;
  ServiceHarness h(mock_app(dir, {jig_reply()}, 2));
  const auto id = new_session(h);

  auto unknown = h.client().Get("/api/sessions/unknown");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK(body_of(unknown) == json{{"code", "not_found"}, {"message", "unknown session"}});
  auto unknown_post = h.post("/api/sessions/unknown/messages", {{"text", "hi"}});
  CHECK(unknown_post->status == 404);

  auto no_text = h.post("/api/sessions/" + id + "/messages", json::object());
  CHECK(no_text->status == 400);
  CHECK(body_of(no_text)["code"] == "bad_request");
  auto bad_json = h.client().Post("/api/sessions/" + id + "/messages", "{not json", "application/json");
  CHECK(bad_json->status == 400);

  CHECK(h.post("/api/sessions/" + id + "/messages", {{"text", kFirstRequest}})->status == 200);
  // The composer script is used up: the upstream failure becomes a 502.
  auto upstream = h.post("/api/sessions/" + id + "/messages", {{"text", kSecondRequest}});
  REQUIRE(upstream);
  CHECK(upstream->status == 502);
  CHECK(body_of(upstream)["code"] == "upstream_error");
  CHECK(body_of(upstream)["message"] == "language model request failed: ScriptExhausted");
  CHECK(body_of(h.client().Get("/api/sessions/" + id))["transcript"].size() == 3);

  new_session(h);
  auto full = h.client().Post("/api/sessions");
  REQUIRE(full);
  CHECK(full->status == 503);
  CHECK(body_of(full)["code"] == "session_limit");
}

TEST_CASE("a concurrent message on a busy session gets 409") {
  TempDir dir;
  auto app = mock_app(dir);
  auto gate = std::make_shared<GateBackend>();
  dialogue::EngineConfig cfg = app.engine->config();
  app.composer_backend = gate;
  app.engine = std::make_unique<dialogue::DialogueEngine>(app.index, app.retrieval_backend, gate, cfg);
  ServiceHarness h(std::move(app));
  const auto id = new_session(h);

  std::thread first([&] {
    httplib::Client c(h.client().host(), h.client().port());
    auto res = c.Post("/api/sessions/" + id + "/messages", json{{"text", kFirstRequest}}.dump(), "application/json");
    CHECK(res->status == 200);
  });
  gate->wait_entered();
  auto busy = h.post("/api/sessions/" + id + "/messages", {{"text", kSecondRequest}});
  REQUIRE(busy);
  CHECK(busy->status == 409);
  CHECK(body_of(busy)["code"] == "turn_in_flight");
  gate->release();
  first.join();
}

TEST_CASE("validate endpoint") {
  TempDir dir;
  ServiceHarness h(mock_app(dir));
  auto ok = h.post("/api/validate", {{"abc", kCompletionAbc}});
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(body_of(ok)["issues"] == json::array());
  CHECK(body_of(ok)["valid"] == true);
  CHECK(body_of(ok)["bars"] == 9);

  std::string mutated = kCompletionAbc;
  mutated.replace(mutated.find("Bdf d2:|"), 8, "d2:|");
  auto short_bar = h.post("/api/validate", {{"abc", mutated}});
  REQUIRE(short_bar);
  CHECK(short_bar->status == 200);
  const auto issues = body_of(short_bar)["issues"];
  REQUIRE(issues.size() == 1);
  CHECK(issues[0]["code"] == "BAR_UNDERFULL");
  CHECK(issues[0]["deficit"] == "3/8");
  CHECK(issues[0]["bar_index"] == 8);
  CHECK(issues[0]["severity"] == "warning");
  CHECK(body_of(short_bar)["valid"] == true);  // underfull bars are warnings

  CHECK(h.post("/api/validate", {{"abc", ""}})->status == 422);
  CHECK(h.post("/api/validate", {{"tune", "x"}})->status == 400);
}

TEST_CASE("retrieve endpoint") {
  TempDir dir;
  ServiceHarness h(mock_app(dir));
  auto ranked = h.post("/api/retrieve", {{"tags", {"jig", "reel", "dorian"}}, {"k", 3}});
  REQUIRE(ranked);
  CHECK(ranked->status == 200);
  const auto c = body_of(ranked)["candidates"];
  REQUIRE(c.size() == 3);
  CHECK(c[0]["id"] == "E1");
  CHECK(c[1]["id"] == "E3");
  CHECK(c[2]["id"] == "E2");
  CHECK(c[1]["similarity_exact"] == "1/4");
  CHECK(body_of(ranked)["retrieval_reply"].is_null());

  auto top1 = h.post("/api/retrieve", {{"tags", {"jig", "reel", "dorian"}}, {"k", 1}});
  CHECK(body_of(top1)["candidates"].size() == 1);

  auto text = h.post("/api/retrieve", {{"text", "something dorian"}});
  REQUIRE(text);
  CHECK(text->status == 200);
  CHECK(body_of(text)["tags"] == json{"dorian", "jig", "reel"});
  CHECK(body_of(text)["retrieval_reply"] == kRetrievalReply);
  CHECK(body_of(text)["candidates"].size() == 3);

  CHECK(body_of(h.post("/api/retrieve", {{"tags", {"nosuchtag"}}}))["candidates"] == json::array());
  CHECK(h.post("/api/retrieve", {{"tags", {"jig"}}, {"k", 0}})->status == 400);
  CHECK(h.post("/api/retrieve", {{"tags", "jig"}})->status == 400);
  CHECK(h.post("/api/retrieve", json::object())->status == 400);
}

TEST_CASE("CORS headers and preflight") {
  TempDir dir;
  ServiceHarness h(mock_app(dir));
  auto res = h.client().Get("/healthz");
  REQUIRE(res);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  auto pre = h.client().Options("/api/sessions");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}

TEST_CASE("sessions are snapshotted on shutdown") {
  TempDir dir;
  auto cfg = mock_app_config(dir);
  cfg["server"]["snapshot"] = "sessions.json";
  ServiceHarness h(service::build_app(service::AppConfig::from_json_text(cfg.dump(), dir.path())));
  const auto id = new_session(h);
  h.post("/api/sessions/" + id + "/messages", {{"text", kFirstRequest}});
  h.shutdown();
  std::ifstream in(dir.path() / "sessions.json");
  REQUIRE(in);
  const auto snap = json::parse(in);
  REQUIRE(snap.size() == 1);
  CHECK(snap[0]["session_id"] == id);
  CHECK(snap[0]["transcript"].size() == 3);
}

TEST_CASE("config validation") {
  TempDir dir;
  const auto good = mock_app_config(dir);
  auto parse = [&](const json& j) { return service::AppConfig::from_json_text(j.dump(), dir.path()); };
  CHECK_NOTHROW(parse(good));

  auto no_models = good;
  no_models.erase("models");
  CHECK_THROWS_AS(parse(no_models), service::ConfigError);
  auto bad_kind = good;
  bad_kind["models"]["composer_model"]["backend"] = "carrier-pigeon";
  CHECK_THROWS_AS(parse(bad_kind), service::ConfigError);
  auto http_without_endpoint = good;
  http_without_endpoint["models"]["composer_model"] = {{"backend", "http"}, {"model", "m"}};
  CHECK_THROWS_AS(parse(http_without_endpoint), service::ConfigError);
  auto bad_k = good;
  bad_k["retrieval"]["k"] = 0;
  CHECK_THROWS_AS(parse(bad_k), service::ConfigError);
  CHECK_THROWS_AS(service::AppConfig::from_json_text("[]", dir.path()), service::ConfigError);

  const auto defaults = parse(good);
  CHECK(defaults.retrieval_model.model.temperature == 0.0);
  CHECK(defaults.composer_model.model.temperature == 0.7);

  auto relative = good;
  relative["templates"]["composer_system"] = "missing.txt";
  const auto cfg = parse(relative);
  CHECK(cfg.composer_system_template == dir.path() / "missing.txt");
  CHECK_THROWS_AS(service::build_app(cfg), MissingTemplate);

  std::ofstream(dir.path() / "bad.txt") << "Compose {style} tunes.";
  relative["templates"]["composer_system"] = "bad.txt";
  CHECK_THROWS_AS(service::build_app(parse(relative)), MissingTemplate);

  auto no_index = good;
  no_index["index"] = "nowhere.tri";
  CHECK_THROWS_AS(service::build_app(parse(no_index)), CorpusError);
}
