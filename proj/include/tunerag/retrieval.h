#pragma once

/**
 * @file retrieval.h
 * @brief Tag extraction through the retrieval model and Jaccard ranking of
 *        corpus entries for few-shot example selection.
 */

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tunerag/corpus.h"
#include "tunerag/llm.h"
#include "tunerag/rational.h"
#include "tunerag/tags.h"

namespace tunerag::retrieval {

struct RankedCandidate {
  std::string entry_id;
  Rational similarity;
  TagSet matched_tags;  ///< query ∩ entry tags

  friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

struct RetrievalConfig {
  std::size_t k = 3;  ///< Must be at least 1; kUnlimited ranks everything.
  bool include_zero_similarity = false;
};

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
Rational jaccard(const TagSet& a, const TagSet& b);

/// Retrievable entries by similarity descending, then id ascending, at most
/// cfg.k of them. Throws std::invalid_argument when cfg.k is 0.
std::vector<RankedCandidate> rank(const TagSet& query, const CorpusIndex& index, const RetrievalConfig& cfg = {});

/// Default system prompt for the retrieval model.
extern const char* const kDefaultRetrievalTemplate;
/// Text substituted for {format_instruction}.
extern const char* const kTagFormatInstruction;

/// "Tune types: ...\nModes: ...\nMeters: ..." with families that have no tags omitted.
std::string format_vocabulary(const TagSet& vocabulary);

/// Renders the retrieval system prompt. Throws MissingTemplate.
std::string render_retrieval_prompt(const std::string& tmpl, const TagSet& vocabulary);

struct TagExtraction {
  TagSet tags;
  std::string raw_reply;
  std::vector<std::string> dropped;  ///< Normalized tokens outside the vocabulary.
};

/// Liberal reply parsing: strips brackets and quotes, splits on ",;\n",
/// normalizes and keeps only vocabulary tags.
TagExtraction parse_tag_reply(const std::string& reply, const TagSet& vocabulary);

/// One call to the retrieval model with [system prompt, request].
/// Throws std::invalid_argument for an empty vocabulary; LlmError propagates.
TagExtraction extract_tags(const std::string& request, const TagSet& vocabulary, llm::ChatBackend& backend,
                           const llm::ModelConfig& model, const std::string& tmpl = kDefaultRetrievalTemplate);

}  // namespace tunerag::retrieval
