#pragma once

/**
 * @file corpus.h
 * @brief Tagged tune collection: ingestion from newline-delimited JSON dumps,
 *        the immutable search index, persistence and exact-copy lookup.
 */

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tunerag/abc.h"
#include "tunerag/rational.h"
#include "tunerag/tags.h"

namespace tunerag {

enum class CorpusErrorCode { kMalformedRecord, kDuplicateId, kVersionMismatch, kCorruptFile, kIo, kBadMapping };

class CorpusError : public std::runtime_error {
 public:
  CorpusError(CorpusErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CorpusErrorCode code() const { return code_; }

 private:
  CorpusErrorCode code_;
};

struct CorpusEntry {
  std::string id;
  std::string title;
  TagSet tags;
  std::string abc;
  std::optional<abc::Tune> parsed;
  std::string parse_error;  ///< Why `parsed` is absent.
  std::string canonical;    ///< abc::normalize(*parsed), empty when unparsed.

  /// Parses `abc` and fills parsed / parse_error / canonical.
  static CorpusEntry create(std::string id, std::string title, TagSet tags, std::string abc);

  bool retrievable() const { return parsed.has_value() && !tags.empty(); }

  friend bool operator==(const CorpusEntry& a, const CorpusEntry& b);
};

/// Immutable collection of entries plus the derived lookup tables.
class CorpusIndex {
 public:
  CorpusIndex() = default;

  /// Throws CorpusError{kDuplicateId} when two entries share an id.
  static CorpusIndex build(std::vector<CorpusEntry> entries);

  const std::map<std::string, CorpusEntry>& entries() const { return entries_; }
  const CorpusEntry* find(const std::string& id) const;
  std::size_t size() const { return entries_.size(); }

  /// Union of every entry's tags.
  const TagSet& vocabulary() const { return vocabulary_; }
  std::map<TagFamily, std::vector<std::string>> vocabulary_by_family() const;

  /// tag -> ascending ids of retrievable entries carrying it.
  const std::map<std::string, std::vector<std::string>>& inverted() const { return inverted_; }

  /// Id of an entry whose canonical text equals normalize(tune) (smallest id
  /// when several match).
  std::optional<std::string> contains_duplicate(const abc::Tune& tune) const;

  friend bool operator==(const CorpusIndex& a, const CorpusIndex& b);

 private:
  std::map<std::string, CorpusEntry> entries_;
  TagSet vocabulary_;
  std::map<std::string, std::vector<std::string>> inverted_;
  std::map<std::string, std::vector<std::string>> canonical_;
};

/// Which source field supplies each entry attribute. Empty names are unmapped.
struct FieldMapping {
  std::string id;
  std::string title;
  std::string type;
  std::string mode;
  std::string meter;
  std::string abc;
  /// L: written into synthesized headers for header-less abc bodies.
  Rational default_unit_length{1, 8};

  /// {"fields": {"abc": "...", ...}, "default_unit_length": "1/8"}
  static FieldMapping from_json_text(const std::string& text);
  static FieldMapping load(const std::filesystem::path& path);
};

struct IngestReport {
  std::size_t loaded = 0;   ///< Entries in the index.
  std::size_t flagged = 0;  ///< Loaded but not retrievable.
  std::size_t skipped = 0;  ///< Records dropped.
  std::vector<std::string> notes;
};

struct IngestResult {
  CorpusIndex index;
  IngestReport report;
};

/// Mode tag from a key string such as "Ddorian" or "F#m"; nullopt for
/// unknown residue. A bare tonic means major.
std::optional<std::string> mode_tag_from_key(std::string_view key);

/// Reads one JSON object per line. Throws CorpusError{kDuplicateId}.
IngestResult ingest(std::istream& records, const FieldMapping& mapping);

inline constexpr int kIndexFormatVersion = 1;

void save_index(const CorpusIndex& index, const std::filesystem::path& path);
/// Throws CorpusError{kVersionMismatch | kCorruptFile | kIo}.
CorpusIndex load_index(const std::filesystem::path& path);

}  // namespace tunerag
