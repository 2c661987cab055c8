#include "tunerag/json_codec.h"

#include <ctime>

namespace tunerag::json_codec {

namespace {

Json optional_fraction(const std::optional<Rational>& r) { return r ? Json(r->str()) : Json(nullptr); }

Json tag_list(const TagSet& tags) { return Json(std::vector<std::string>(tags.begin(), tags.end())); }

}  // namespace

Json to_json(const abc::ValidationIssue& issue) {
  Json j;
  j["severity"] = abc::to_string(issue.severity);
  j["code"] = abc::to_string(issue.code);
  j["bar_index"] = issue.bar_index ? Json(*issue.bar_index) : Json(nullptr);
  j["detail"] = issue.detail;
  j["expected_fill"] = optional_fraction(issue.expected_fill);
  j["actual_fill"] = optional_fraction(issue.actual_fill);
  j["deficit"] = optional_fraction(issue.deficit());
  return j;
}

Json to_json(const std::vector<abc::ValidationIssue>& issues) {
  Json arr = Json::array();
  for (const auto& i : issues) arr.push_back(to_json(i));
  return arr;
}

Json to_json(const retrieval::RankedCandidate& candidate, const CorpusIndex& index) {
  const auto* entry = index.find(candidate.entry_id);
  Json j;
  j["id"] = candidate.entry_id;
  j["title"] = entry ? entry->title : "";
  j["tags"] = entry ? tag_list(entry->tags) : Json::array();
  j["similarity"] = candidate.similarity.decimal();
  j["similarity_exact"] = candidate.similarity.str();
  j["matched_tags"] = tag_list(candidate.matched_tags);
  return j;
}

Json to_json(const std::vector<retrieval::RankedCandidate>& candidates, const CorpusIndex& index) {
  Json arr = Json::array();
  for (const auto& c : candidates) arr.push_back(to_json(c, index));
  return arr;
}

Json to_json(const llm::ChatMessage& message) {
  Json j;
  j["role"] = llm::to_string(message.role);
  j["content"] = message.content;
  return j;
}

Json to_json(const dialogue::TurnResult& turn, const CorpusIndex& index) {
  Json j;
  j["user_request"] = turn.user_request;
  j["extracted_tags"] = tag_list(turn.extracted_tags);
  j["retrieval_reply"] = turn.retrieval_reply;
  j["retrieved"] = to_json(turn.retrieved, index);
  j["commentary"] = turn.commentary;
  j["abc"] = turn.tune_text.empty() ? Json(nullptr) : Json(turn.tune_text);
  j["tune_parsed"] = turn.tune.has_value();
  j["validation"] = to_json(turn.validation);
  j["duplicate_of"] = turn.duplicate_of ? Json(*turn.duplicate_of) : Json(nullptr);
  j["format_error"] = turn.format_error ? Json(*turn.format_error) : Json(nullptr);
  j["composer_calls"] = turn.composer_calls;
  j["raw_composer_output"] = turn.raw_composer_output;
  return j;
}

Json to_json(const dialogue::SessionView& session, const CorpusIndex& index) {
  Json j;
  j["session_id"] = session.id;
  j["created_at"] = iso8601(session.created_at);
  j["transcript"] = Json::array();
  for (const auto& m : session.transcript) j["transcript"].push_back(to_json(m));
  j["turns"] = Json::array();
  for (const auto& t : session.turns) j["turns"].push_back(to_json(t, index));
  return j;
}

Json vocabulary_json(const CorpusIndex& index) {
  Json j = Json::object();
  for (const auto& [family, tags] : index.vocabulary_by_family()) j[to_string(family)] = tags;
  return j;
}

std::string iso8601(std::chrono::system_clock::time_point t) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm utc{};
  gmtime_r(&secs, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace tunerag::json_codec
