#pragma once

/**
 * @file dialogue.h
 * @brief Multi-turn composition sessions: per-request retrieval, few-shot
 *        prompt assembly, composer call, tune extraction, validation and
 *        exact-copy checking.
 */

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tunerag/abc.h"
#include "tunerag/corpus.h"
#include "tunerag/llm.h"
#include "tunerag/retrieval.h"

namespace tunerag::dialogue {

/// A second turn was started on a session whose previous turn is still running.
class TurnInFlight : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The session reached EngineConfig::max_turns.
class TurnLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The engine already holds EngineConfig::max_sessions sessions.
class SessionLimitReached : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prompt texts. `composer_system` and `reprompt` take no placeholders;
/// `turn` takes {examples} and {request}; `retrieval_system` takes
/// {vocabulary_by_family} and {format_instruction}.
struct PromptTemplates {
  std::string composer_system;
  std::string turn;
  std::string retrieval_system;
  std::string reprompt;

  static PromptTemplates defaults();
};

extern const char* const kDefaultComposerSystemTemplate;
extern const char* const kDefaultTurnTemplate;
extern const char* const kDefaultRepromptTemplate;

struct EngineConfig {
  retrieval::RetrievalConfig retrieval;
  llm::ModelConfig retrieval_model;
  llm::ModelConfig composer_model;
  PromptTemplates templates = PromptTemplates::defaults();
  std::size_t max_turns = 50;
  std::size_t max_sessions = 0;  ///< 0 means unlimited.
};

struct TurnResult {
  std::string user_request;
  TagSet extracted_tags;
  std::string retrieval_reply;  ///< Raw retrieval model text, kept for audit.
  std::vector<retrieval::RankedCandidate> retrieved;
  std::string commentary;
  std::optional<abc::Tune> tune;
  std::string tune_text;  ///< The abc block as the composer wrote it.
  std::string raw_composer_output;
  std::vector<abc::ValidationIssue> validation;
  std::optional<std::string> duplicate_of;
  /// Set when no tune could be extracted even after the reprompt.
  std::optional<std::string> format_error;
  int composer_calls = 0;
};

struct ComposerOutput {
  std::string commentary;
  std::optional<std::string> tune_text;
  std::optional<abc::Tune> tune;
  std::string parse_error;  ///< Why `tune` is absent although `tune_text` is set.
};

/// Locates the tune: the first fenced block holding an abc header line, else
/// the run of non-blank lines starting at the first X:/T:/M:/K: line.
/// Commentary is the trimmed text before the tune.
ComposerOutput parse_composer_output(const std::string& raw);

/// The examples section of a turn message; empty for no examples.
std::string format_examples(const std::vector<const CorpusEntry*>& examples);

/// Point-in-time copy of a session.
struct SessionView {
  std::string id;
  std::chrono::system_clock::time_point created_at;
  std::vector<llm::ChatMessage> transcript;
  std::vector<TurnResult> turns;
};

class Session {
 public:
  Session(std::string id, llm::ChatMessage system_prompt);

  const std::string& id() const { return id_; }
  std::chrono::system_clock::time_point created_at() const { return created_at_; }
  SessionView view() const;
  std::vector<llm::ChatMessage> transcript() const;
  std::size_t turn_count() const;
  bool turn_in_flight() const { return in_flight_.load(); }

 private:
  friend class DialogueEngine;

  std::string id_;
  std::chrono::system_clock::time_point created_at_;
  mutable std::mutex mutex_;
  std::vector<llm::ChatMessage> transcript_;
  std::vector<TurnResult> turns_;
  std::atomic<bool> in_flight_{false};
};

/// True when the transcript is one system message followed by alternating
/// user/assistant messages ending with an assistant message (or nothing).
bool transcript_well_formed(const std::vector<llm::ChatMessage>& transcript);

struct TurnLog {
  std::string session_id;
  bool ok = false;
  std::string error;
  TagSet tags;
  std::vector<std::string> retrieved_ids;
  int composer_calls = 0;
  std::chrono::milliseconds latency{0};
};

class DialogueEngine {
 public:
  /// Throws MissingTemplate when a template has placeholders it cannot fill.
  DialogueEngine(std::shared_ptr<const CorpusIndex> index, std::shared_ptr<llm::ChatBackend> retrieval_backend,
                 std::shared_ptr<llm::ChatBackend> composer_backend, EngineConfig config);

  /// Registers a session whose transcript holds only the composer system prompt.
  /// Throws SessionLimitReached.
  std::shared_ptr<Session> new_session();
  std::shared_ptr<Session> find_session(const std::string& id) const;
  std::vector<std::shared_ptr<Session>> sessions() const;
  std::size_t session_count() const;

  /// Runs one turn. The transcript is changed only when the turn completes.
  /// Throws TurnInFlight, TurnLimitExceeded or llm::LlmError.
  TurnResult handle_request(Session& session, const std::string& user_text);

  /// The user message for a turn: examples section then the verbatim request.
  llm::ChatMessage build_prompt(const std::vector<const CorpusEntry*>& examples, const std::string& request) const;

  void set_turn_logger(std::function<void(const TurnLog&)> logger) { logger_ = std::move(logger); }

  const CorpusIndex& index() const { return *index_; }
  const EngineConfig& config() const { return config_; }

 private:
  TurnResult run_turn(std::vector<llm::ChatMessage>& transcript, const std::string& user_text);
  std::string next_session_id();

  std::shared_ptr<const CorpusIndex> index_;
  std::shared_ptr<llm::ChatBackend> retrieval_backend_;
  std::shared_ptr<llm::ChatBackend> composer_backend_;
  EngineConfig config_;
  std::string system_prompt_;
  std::function<void(const TurnLog&)> logger_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_rng_;
};

}  // namespace tunerag::dialogue
