#pragma once

/**
 * @file llm.h
 * @brief Chat-completion backends: an HTTP client for the common
 *        `/chat/completions` REST shape and a scripted mock for tests.
 */

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tunerag::llm {

enum class Role { kSystem, kUser, kAssistant };

std::string to_string(Role role);
std::optional<Role> role_from_string(std::string_view text);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ModelConfig {
  std::string endpoint;  ///< Base URL; requests go to {endpoint}/chat/completions.
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  std::chrono::milliseconds backoff{500};  ///< First retry delay; doubles per retry.
};

enum class LlmErrorKind { kTimeout, kTransport, kApi, kMalformedResponse, kScriptExhausted, kInvalidRequest };

std::string to_string(LlmErrorKind kind);

class LlmError : public std::runtime_error {
 public:
  LlmError(LlmErrorKind kind, const std::string& what, int status = 0, std::string excerpt = {})
      : std::runtime_error(what), kind_(kind), status_(status), excerpt_(std::move(excerpt)) {}

  LlmErrorKind kind() const { return kind_; }
  int status() const { return status_; }                   ///< HTTP status for kApi.
  const std::string& excerpt() const { return excerpt_; }  ///< First bytes of the upstream body.

 private:
  LlmErrorKind kind_;
  int status_;
  std::string excerpt_;
};

/// Throws LlmError{kInvalidRequest} unless the list starts with exactly one
/// system message and user/assistant messages are non-empty.
void check_messages(std::span<const ChatMessage> messages);

/// JSON request body with keys in the order model, messages, temperature, max_tokens.
std::string build_request_body(std::span<const ChatMessage> messages, const ModelConfig& cfg);

/// choices[0].message.content of a reply body; throws LlmError{kMalformedResponse}.
std::string parse_response_body(const std::string& body);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Single assistant reply for the conversation so far.
  virtual ChatMessage complete(std::span<const ChatMessage> messages, const ModelConfig& cfg) = 0;
};

/// Talks HTTP(S) to an OpenAI-style endpoint. Transport failures, timeouts,
/// 408, 429 and 5xx are retried with exponential backoff; other 4xx are not.
class HttpBackend : public ChatBackend {
 public:
  /// `api_key` defaults to the LLM_API_KEY environment variable.
  explicit HttpBackend(int concurrency_limit = 4, std::optional<std::string> api_key = std::nullopt);

  ChatMessage complete(std::span<const ChatMessage> messages, const ModelConfig& cfg) override;

  /// Attempts made by the last complete() call on this thread.
  static int last_attempts();

 private:
  std::string attempt(const std::string& body, const ModelConfig& cfg);

  std::optional<std::string> api_key_;
  std::counting_semaphore<1024> slots_;
};

/// Deterministic backend. Either consumes a reply script in order or answers
/// from a rule table (first matching rule wins). Every call is logged.
class MockBackend : public ChatBackend {
 public:
  struct Reply {
    std::string text;
    std::optional<LlmErrorKind> failure;  ///< Throw instead of replying.

    static Reply fail(LlmErrorKind kind) { return Reply{{}, kind}; }
  };
  using Predicate = std::function<bool(std::span<const ChatMessage>)>;
  struct Rule {
    Predicate matches;
    Reply reply;
  };
  struct Exchange {
    std::vector<ChatMessage> request;
    std::string model;
    std::optional<std::string> reply;  ///< Empty when the call failed.
  };

  /// Throws std::invalid_argument for an empty script.
  static std::shared_ptr<MockBackend> scripted(std::vector<Reply> script);
  static std::shared_ptr<MockBackend> scripted(std::vector<std::string> replies);
  static std::shared_ptr<MockBackend> matching(std::vector<Rule> rules);

  /// Rule matching when the last message's content contains `needle`.
  static Rule when_contains(std::string needle, std::string reply);

  ChatMessage complete(std::span<const ChatMessage> messages, const ModelConfig& cfg) override;

  std::vector<Exchange> log() const;
  std::size_t calls() const;

 private:
  MockBackend() = default;

  mutable std::mutex mutex_;
  std::vector<Reply> script_;
  std::size_t next_ = 0;
  std::vector<Rule> rules_;
  bool use_rules_ = false;
  std::vector<Exchange> log_;
};

}  // namespace tunerag::llm
