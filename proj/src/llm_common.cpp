#include <json.hpp>

#include "tunerag/llm.h"

namespace tunerag::llm {

std::string to_string(Role role) {
  switch (role) {
    case Role::kSystem:
      return "system";
    case Role::kUser:
      return "user";
    case Role::kAssistant:
      return "assistant";
  }
  return "user";
}

std::optional<Role> role_from_string(std::string_view text) {
  if (text == "system") return Role::kSystem;
  if (text == "user") return Role::kUser;
  if (text == "assistant") return Role::kAssistant;
  return std::nullopt;
}

std::string to_string(LlmErrorKind kind) {
  switch (kind) {
    case LlmErrorKind::kTimeout:
      return "Timeout";
    case LlmErrorKind::kTransport:
      return "TransportError";
    case LlmErrorKind::kApi:
      return "ApiError";
    case LlmErrorKind::kMalformedResponse:
      return "MalformedResponse";
    case LlmErrorKind::kScriptExhausted:
      return "ScriptExhausted";
    case LlmErrorKind::kInvalidRequest:
      return "InvalidRequest";
  }
  return "ApiError";
}

void check_messages(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw LlmError(LlmErrorKind::kInvalidRequest, "no messages");
  if (messages.front().role != Role::kSystem) {
    throw LlmError(LlmErrorKind::kInvalidRequest, "first message must be the system prompt");
  }
  for (std::size_t i = 1; i < messages.size(); ++i) {
    if (messages[i].role == Role::kSystem) throw LlmError(LlmErrorKind::kInvalidRequest, "more than one system message");
    if (messages[i].content.empty()) {
      throw LlmError(LlmErrorKind::kInvalidRequest, "message " + std::to_string(i) + " is empty");
    }
  }
}

std::string build_request_body(std::span<const ChatMessage> messages, const ModelConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    nlohmann::ordered_json item;
    item["role"] = to_string(m.role);
    item["content"] = m.content;
    body["messages"].push_back(std::move(item));
  }
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  return body.dump();
}

std::string parse_response_body(const std::string& body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw LlmError(LlmErrorKind::kMalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw LlmError(LlmErrorKind::kMalformedResponse, std::string("malformed completion response: ") + e.what(), 0,
                   body.substr(0, 200));
  }
}

}  // namespace tunerag::llm
