#include <stdexcept>

#include "tunerag/llm.h"

namespace tunerag::llm {

std::shared_ptr<MockBackend> MockBackend::scripted(std::vector<Reply> script) {
  if (script.empty()) throw std::invalid_argument("mock script must not be empty");
  std::shared_ptr<MockBackend> mock(new MockBackend());
  mock->script_ = std::move(script);
  return mock;
}

std::shared_ptr<MockBackend> MockBackend::scripted(std::vector<std::string> replies) {
  std::vector<Reply> script;
  for (auto& r : replies) script.push_back(Reply{std::move(r), std::nullopt});
  return scripted(std::move(script));
}

std::shared_ptr<MockBackend> MockBackend::matching(std::vector<Rule> rules) {
  std::shared_ptr<MockBackend> mock(new MockBackend());
  mock->rules_ = std::move(rules);
  mock->use_rules_ = true;
  return mock;
}

MockBackend::Rule MockBackend::when_contains(std::string needle, std::string reply) {
  return Rule{[needle = std::move(needle)](std::span<const ChatMessage> messages) {
                return !messages.empty() && messages.back().content.find(needle) != std::string::npos;
              },
              Reply{std::move(reply), std::nullopt}};
}

ChatMessage MockBackend::complete(std::span<const ChatMessage> messages, const ModelConfig& cfg) {
  check_messages(messages);
  std::lock_guard lock(mutex_);
  Exchange exchange{std::vector<ChatMessage>(messages.begin(), messages.end()), cfg.model, std::nullopt};

  const Reply* reply = nullptr;
  if (use_rules_) {
    for (const auto& rule : rules_) {
      if (rule.matches(messages)) {
        reply = &rule.reply;
        break;
      }
    }
    if (!reply) {
      log_.push_back(std::move(exchange));
      throw LlmError(LlmErrorKind::kScriptExhausted, "no mock rule matches the request");
    }
  } else {
    if (next_ >= script_.size()) {
      log_.push_back(std::move(exchange));
      throw LlmError(LlmErrorKind::kScriptExhausted,
                     "mock script exhausted after " + std::to_string(script_.size()) + " replies");
    }
    reply = &script_[next_++];
  }

  if (reply->failure) {
    log_.push_back(std::move(exchange));
    throw LlmError(*reply->failure, "scripted failure: " + to_string(*reply->failure));
  }
  exchange.reply = reply->text;
  log_.push_back(std::move(exchange));
  return ChatMessage{Role::kAssistant, reply->text};
}

std::vector<MockBackend::Exchange> MockBackend::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

}  // namespace tunerag::llm
