#include "tunerag/dialogue.h"

#include <cstdio>

#include "text_util.h"
#include "tunerag/prompt_template.h"

namespace tunerag::dialogue {

const char* const kDefaultComposerSystemTemplate =
    "You are a composer of Irish traditional folk music who writes in abc notation.\n"
    "\n"
    "For every request, first write a short commentary on the piece you are about to\n"
    "write: its tune type, mode, meter, character and structure. Then write exactly one\n"
    "complete tune in abc notation inside a fenced code block that starts with ```abc\n"
    "and ends with ```. The tune must have X:, T:, M:, L: and K: header lines, and every\n"
    "bar must be filled according to the meter. Write nothing after the code block.\n"
    "\n"
    "A request may be preceded by example tunes taken from a database. Use them as\n"
    "guidance for idiom, form and style, but never copy an example.\n"
    "\n"
    "When the user asks for changes to an earlier tune, apply them and write the whole\n"
    "revised tune again in the same format.\n";

const char* const kDefaultTurnTemplate = "{examples}{request}";

const char* const kDefaultRepromptTemplate =
    "Your previous reply did not contain a readable abc tune. Reply again with a short\n"
    "commentary followed by exactly one complete tune in abc notation inside a fenced\n"
    "code block that starts with ```abc and ends with ```.\n";

PromptTemplates PromptTemplates::defaults() {
  return PromptTemplates{kDefaultComposerSystemTemplate, kDefaultTurnTemplate, retrieval::kDefaultRetrievalTemplate,
                         kDefaultRepromptTemplate};
}

namespace {

bool is_abc_header_line(std::string_view line) {
  line = detail::trim(line);
  return line.size() >= 2 && line[1] == ':' && (line[0] == 'X' || line[0] == 'T' || line[0] == 'M' || line[0] == 'K');
}

bool is_fence(std::string_view line) { return detail::trim(line).substr(0, 3) == "```"; }

std::string join_lines(const std::vector<std::string>& lines, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    out += lines[i];
    out += '\n';
  }
  return out;
}

class InFlightGuard {
 public:
  explicit InFlightGuard(std::atomic<bool>& flag) : flag_(flag) {
    bool expected = false;
    if (!flag_.compare_exchange_strong(expected, true)) throw TurnInFlight("a turn is already running in this session");
  }
  ~InFlightGuard() { flag_.store(false); }
  InFlightGuard(const InFlightGuard&) = delete;
  InFlightGuard& operator=(const InFlightGuard&) = delete;

 private:
  std::atomic<bool>& flag_;
};

}  // namespace

ComposerOutput parse_composer_output(const std::string& raw) {
  const auto lines = detail::split_lines(raw);
  ComposerOutput out;
  std::optional<std::size_t> block_begin;  // first line of the tune text
  std::optional<std::size_t> block_end;    // one past its last line
  std::size_t commentary_end = lines.size();

  for (std::size_t i = 0; i < lines.size() && !block_begin; ++i) {
    if (!is_fence(lines[i])) continue;
    std::size_t j = i + 1;
    while (j < lines.size() && !is_fence(lines[j])) ++j;
    bool has_header = false;
    for (std::size_t k = i + 1; k < j; ++k) has_header |= is_abc_header_line(lines[k]);
    if (has_header) {
      block_begin = i + 1;
      block_end = j;
      commentary_end = i;
    }
    i = j;  // skip past the closing fence
  }

  if (!block_begin) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!is_abc_header_line(lines[i])) continue;
      std::size_t j = i;
      while (j < lines.size() && !detail::trim(lines[j]).empty() && !is_fence(lines[j])) ++j;
      block_begin = i;
      block_end = j;
      commentary_end = i;
      break;
    }
  }

  out.commentary = std::string(detail::trim(join_lines(lines, 0, commentary_end)));
  if (!block_begin) {
    out.commentary = std::string(detail::trim(raw));
    return out;
  }
  out.tune_text = join_lines(lines, *block_begin, *block_end);
  try {
    out.tune = abc::parse_tune(*out.tune_text);
  } catch (const abc::ParseError& e) {
    out.parse_error = e.what();
  }
  return out;
}

std::string format_examples(const std::vector<const CorpusEntry*>& examples) {
  if (examples.empty()) return {};
  std::string out = "Example tunes from the database, most relevant first:\n\n";
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = *examples[i];
    const std::string n = std::to_string(i + 1);
    out += "--- Example " + n + " (tags: " + e.tags.join() + ") ---\n";
    out += e.abc;
    if (!e.abc.empty() && e.abc.back() != '\n') out += '\n';
  }
  out += "--- End of examples ---\n\n";
  return out;
}

bool transcript_well_formed(const std::vector<llm::ChatMessage>& transcript) {
  if (transcript.empty() || transcript.front().role != llm::Role::kSystem) return false;
  for (std::size_t i = 1; i < transcript.size(); ++i) {
    const auto expected = (i % 2 == 1) ? llm::Role::kUser : llm::Role::kAssistant;
    if (transcript[i].role != expected || transcript[i].content.empty()) return false;
  }
  return transcript.size() % 2 == 1;
}

Session::Session(std::string id, llm::ChatMessage system_prompt)
    : id_(std::move(id)), created_at_(std::chrono::system_clock::now()) {
  transcript_.push_back(std::move(system_prompt));
}

SessionView Session::view() const {
  std::lock_guard lock(mutex_);
  return SessionView{id_, created_at_, transcript_, turns_};
}

std::vector<llm::ChatMessage> Session::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

std::size_t Session::turn_count() const {
  std::lock_guard lock(mutex_);
  return turns_.size();
}

DialogueEngine::DialogueEngine(std::shared_ptr<const CorpusIndex> index,
                               std::shared_ptr<llm::ChatBackend> retrieval_backend,
                               std::shared_ptr<llm::ChatBackend> composer_backend, EngineConfig config)
    : index_(std::move(index)),
      retrieval_backend_(std::move(retrieval_backend)),
      composer_backend_(std::move(composer_backend)),
      config_(std::move(config)),
      id_rng_(std::random_device{}()) {
  if (!index_ || !retrieval_backend_ || !composer_backend_) throw std::invalid_argument("dialogue engine needs an index and two backends");
  if (config_.retrieval.k == 0) throw std::invalid_argument("retrieval k must be at least 1");
  // Render everything once so bad templates fail at startup.
  system_prompt_ = render_template(config_.templates.composer_system, {});
  render_template(config_.templates.turn, {{"examples", ""}, {"request", ""}});
  render_template(config_.templates.reprompt, {});
  retrieval::render_retrieval_prompt(config_.templates.retrieval_system, TagSet{"jig"});
}

std::string DialogueEngine::next_session_id() {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
  return buf;
}

std::shared_ptr<Session> DialogueEngine::new_session() {
  std::lock_guard lock(sessions_mutex_);
  if (config_.max_sessions != 0 && sessions_.size() >= config_.max_sessions) {
    throw SessionLimitReached("session limit of " + std::to_string(config_.max_sessions) + " reached");
  }
  std::string id;
  do {
    id = next_session_id();
  } while (sessions_.count(id));
  auto session = std::make_shared<Session>(id, llm::ChatMessage{llm::Role::kSystem, system_prompt_});
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<Session> DialogueEngine::find_session(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<Session>> DialogueEngine::sessions() const {
  std::lock_guard lock(sessions_mutex_);
  std::vector<std::shared_ptr<Session>> out;
  for (const auto& [id, s] : sessions_) out.push_back(s);
  return out;
}

std::size_t DialogueEngine::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

llm::ChatMessage DialogueEngine::build_prompt(const std::vector<const CorpusEntry*>& examples,
                                              const std::string& request) const {
  return llm::ChatMessage{llm::Role::kUser, render_template(config_.templates.turn,
                                                            {{"examples", format_examples(examples)}, {"request", request}})};
}

TurnResult DialogueEngine::run_turn(std::vector<llm::ChatMessage>& transcript, const std::string& user_text) {
  TurnResult result;
  result.user_request = user_text;

  if (!index_->vocabulary().empty()) {
    auto extraction = retrieval::extract_tags(user_text, index_->vocabulary(), *retrieval_backend_,
                                              config_.retrieval_model, config_.templates.retrieval_system);
    result.extracted_tags = std::move(extraction.tags);
    result.retrieval_reply = std::move(extraction.raw_reply);
  }
  result.retrieved = retrieval::rank(result.extracted_tags, *index_, config_.retrieval);

  std::vector<const CorpusEntry*> examples;
  for (const auto& c : result.retrieved) examples.push_back(index_->find(c.entry_id));
  transcript.push_back(build_prompt(examples, user_text));

  ComposerOutput parsed;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) transcript.push_back({llm::Role::kUser, render_template(config_.templates.reprompt, {})});
    auto reply = composer_backend_->complete(transcript, config_.composer_model);
    ++result.composer_calls;
    if (reply.content.empty()) reply.content = " ";  // keeps the transcript sendable
    transcript.push_back({llm::Role::kAssistant, reply.content});
    result.raw_composer_output = reply.content;
    parsed = parse_composer_output(reply.content);
    if (parsed.tune) break;
  }

  result.commentary = std::move(parsed.commentary);
  result.tune_text = parsed.tune_text.value_or("");
  result.tune = std::move(parsed.tune);
  if (result.tune) {
    result.validation = abc::validate(*result.tune);
    result.duplicate_of = index_->contains_duplicate(*result.tune);
  } else if (parsed.tune_text) {
    result.format_error = "tune block could not be parsed: " + parsed.parse_error;
  } else {
    result.format_error = "no abc tune found in the composer reply";
  }
  return result;
}

TurnResult DialogueEngine::handle_request(Session& session, const std::string& user_text) {
  InFlightGuard guard(session.in_flight_);
  const auto started = std::chrono::steady_clock::now();
  TurnLog log;
  log.session_id = session.id();

  std::vector<llm::ChatMessage> working;
  {
    std::lock_guard lock(session.mutex_);
    if (session.turns_.size() >= config_.max_turns) {
      throw TurnLimitExceeded("session reached the limit of " + std::to_string(config_.max_turns) + " turns");
    }
    working = session.transcript_;
  }

  auto finish_log = [&] {
    log.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    if (logger_) logger_(log);
  };

  TurnResult result;
  try {
    if (detail::trim(user_text).empty()) throw std::invalid_argument("user message is empty");
    result = run_turn(working, user_text);
  } catch (const std::exception& e) {
    log.error = e.what();
    finish_log();
    throw;
  }

  {
    std::lock_guard lock(session.mutex_);
    session.transcript_ = std::move(working);
    session.turns_.push_back(result);
  }
  log.ok = true;
  log.tags = result.extracted_tags;
  for (const auto& c : result.retrieved) log.retrieved_ids.push_back(c.entry_id);
  log.composer_calls = result.composer_calls;
  finish_log();
  return result;
}

}  // namespace tunerag::dialogue
