#pragma once

/**
 * @file json_codec.h
 * @brief JSON shapes shared by the HTTP API, the CLI and transcript export.
 */

#include <json.hpp>

#include "tunerag/abc.h"
#include "tunerag/corpus.h"
#include "tunerag/dialogue.h"
#include "tunerag/llm.h"
#include "tunerag/retrieval.h"

namespace tunerag::json_codec {

using Json = nlohmann::ordered_json;

/// {severity, code, bar_index, detail, expected_fill, actual_fill, deficit};
/// fills are exact fractions such as "3/8", null when not applicable.
Json to_json(const abc::ValidationIssue& issue);
Json to_json(const std::vector<abc::ValidationIssue>& issues);

/// {id, title, tags, similarity, similarity_exact, matched_tags}; similarity is
/// a decimal string ("0.25"), similarity_exact the reduced fraction ("1/4").
Json to_json(const retrieval::RankedCandidate& candidate, const CorpusIndex& index);
Json to_json(const std::vector<retrieval::RankedCandidate>& candidates, const CorpusIndex& index);

Json to_json(const llm::ChatMessage& message);
Json to_json(const dialogue::TurnResult& turn, const CorpusIndex& index);

/// {session_id, created_at, transcript, turns}
Json to_json(const dialogue::SessionView& session, const CorpusIndex& index);

/// {"type": [...], "mode": [...], "meter": [...]}
Json vocabulary_json(const CorpusIndex& index);

/// UTC "YYYY-MM-DDTHH:MM:SSZ".
std::string iso8601(std::chrono::system_clock::time_point t);

}  // namespace tunerag::json_codec
