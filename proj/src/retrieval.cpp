#include "tunerag/retrieval.h"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "text_util.h"
#include "tunerag/prompt_template.h"

namespace tunerag::retrieval {

const char* const kDefaultRetrievalTemplate =
    "You pick search tags for a database of Irish traditional tunes written in abc notation.\n"
    "Given a request from a user, choose the tags describing tunes that would be useful\n"
    "examples for answering it. Only tags from the lists below exist in the database.\n"
    "\n"
    "{vocabulary_by_family}\n"
    "\n"
    "{format_instruction}\n";

const char* const kTagFormatInstruction =
    "Reply with the chosen tags only, as a comma-separated list in curly braces, for example\n"
    "{jig, dorian, 6/8}. Reply {} if no tag fits.";

Rational jaccard(const TagSet& a, const TagSet& b) {
  std::size_t common = 0;
  for (const auto& t : a) common += b.contains(t) ? 1 : 0;
  const std::size_t united = a.size() + b.size() - common;
  if (united == 0) return Rational(0);
  return Rational(static_cast<std::int64_t>(common), static_cast<std::int64_t>(united));
}

std::vector<RankedCandidate> rank(const TagSet& query, const CorpusIndex& index, const RetrievalConfig& cfg) {
  if (cfg.k == 0) throw std::invalid_argument("retrieval k must be at least 1");
  std::vector<RankedCandidate> out;
  for (const auto& [id, entry] : index.entries()) {
    if (!entry.retrievable()) continue;
    RankedCandidate c{id, jaccard(query, entry.tags), {}};
    if (c.similarity == Rational(0) && !cfg.include_zero_similarity) continue;
    for (const auto& t : query) {
      if (entry.tags.contains(t)) c.matched_tags.insert(t);
    }
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry_id < b.entry_id;
  });
  if (out.size() > cfg.k) out.resize(cfg.k);
  return out;
}

std::string format_vocabulary(const TagSet& vocabulary) {
  std::map<TagFamily, std::vector<std::string>> families;
  for (const auto& t : vocabulary) families[tag_family(t)].push_back(t);
  const std::pair<TagFamily, const char*> order[] = {
      {TagFamily::kTuneType, "Tune types"}, {TagFamily::kMode, "Modes"}, {TagFamily::kMeter, "Meters"}};
  std::string out;
  for (const auto& [family, label] : order) {
    auto it = families.find(family);
    if (it == families.end()) continue;
    if (!out.empty()) out += '\n';
    out += label;
    out += ": ";
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) out += ", ";
      out += it->second[i];
    }
  }
  return out;
}

std::string render_retrieval_prompt(const std::string& tmpl, const TagSet& vocabulary) {
  return render_template(tmpl, {{"vocabulary_by_family", format_vocabulary(vocabulary)},
                                {"format_instruction", kTagFormatInstruction}});
}

TagExtraction parse_tag_reply(const std::string& reply, const TagSet& vocabulary) {
  TagExtraction out;
  out.raw_reply = reply;
  std::string cleaned;
  for (char c : reply) {
    switch (c) {
      case '{': case '}': case '[': case ']': case '(': case ')': case '"': case '\'': case '`':
        cleaned.push_back(' ');
        break;
      case ';': case '\n': case '\r':
        cleaned.push_back(',');
        break;
      default:
        cleaned.push_back(c);
    }
  }
  std::size_t start = 0;
  while (start <= cleaned.size()) {
    auto end = cleaned.find(',', start);
    if (end == std::string::npos) end = cleaned.size();
    std::string_view token = detail::trim(std::string_view(cleaned).substr(start, end - start));
    // List bullets and sentence punctuation around a tag.
    while (!token.empty() && (token.front() == '-' || token.front() == '*')) token = detail::trim(token.substr(1));
    while (!token.empty() && (token.back() == '.' || token.back() == ':')) token.remove_suffix(1);
    const std::string tag = TagSet::normalize(token);
    if (!tag.empty()) {
      if (vocabulary.contains(tag)) {
        out.tags.insert(tag);
      } else if (std::find(out.dropped.begin(), out.dropped.end(), tag) == out.dropped.end()) {
        out.dropped.push_back(tag);
      }
    }
    start = end + 1;
  }
  return out;
}

TagExtraction extract_tags(const std::string& request, const TagSet& vocabulary, llm::ChatBackend& backend,
                           const llm::ModelConfig& model, const std::string& tmpl) {
  if (vocabulary.empty()) throw std::invalid_argument("tag extraction needs a non-empty vocabulary");
  const std::vector<llm::ChatMessage> messages = {
      {llm::Role::kSystem, render_retrieval_prompt(tmpl, vocabulary)},
      {llm::Role::kUser, request},
  };
  const auto reply = backend.complete(messages, model);
  return parse_tag_reply(reply.content, vocabulary);
}

}  // namespace tunerag::retrieval
