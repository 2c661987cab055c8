#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "tunerag/llm.h"

namespace tunerag::llm {

namespace {

thread_local int tls_last_attempts = 0;

struct Endpoint {
  std::string base;  ///< scheme://host[:port]
  std::string path;  ///< Prefix without a trailing slash.
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw LlmError(LlmErrorKind::kInvalidRequest, "endpoint must be an http(s) URL: '" + url + "'");
  }
  std::string path = m[2].matched ? m[2].str() : "";
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {m[1].str(), path};
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

HttpBackend::HttpBackend(int concurrency_limit, std::optional<std::string> api_key)
    : api_key_(std::move(api_key)), slots_(concurrency_limit < 1 ? 1 : concurrency_limit) {
  if (!api_key_) {
    if (const char* env = std::getenv("LLM_API_KEY"); env && *env) api_key_ = env;
  }
}

int HttpBackend::last_attempts() { return tls_last_attempts; }

std::string HttpBackend::attempt(const std::string& body, const ModelConfig& cfg) {
  const Endpoint ep = split_endpoint(cfg.endpoint);
  httplib::Client client(ep.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(ep.path + "/chat/completions", headers, body, "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const auto err = res.error();
    // httplib reports a read timeout as a plain read error; elapsed time tells them apart.
    if (err == httplib::Error::ConnectionTimeout || elapsed >= cfg.timeout * 9 / 10) {
      throw LlmError(LlmErrorKind::kTimeout, "request timed out after " + std::to_string(cfg.timeout.count()) + " ms");
    }
    throw LlmError(LlmErrorKind::kTransport, "transport error: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw LlmError(LlmErrorKind::kApi, "upstream returned HTTP " + std::to_string(res->status), res->status,
                   res->body.substr(0, 200));
  }
  return parse_response_body(res->body);
}

ChatMessage HttpBackend::complete(std::span<const ChatMessage> messages, const ModelConfig& cfg) {
  check_messages(messages);
  const std::string body = build_request_body(messages, cfg);
  SlotGuard slot(slots_);
  tls_last_attempts = 0;
  auto delay = cfg.backoff;
  for (int attempt_no = 0;; ++attempt_no) {
    ++tls_last_attempts;
    try {
      return ChatMessage{Role::kAssistant, attempt(body, cfg)};
    } catch (const LlmError& e) {
      const bool retryable = e.kind() == LlmErrorKind::kTimeout || e.kind() == LlmErrorKind::kTransport ||
                             (e.kind() == LlmErrorKind::kApi && retryable_status(e.status()));
      if (!retryable || attempt_no >= cfg.max_retries) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace tunerag::llm
