#include "tunerag/corpus.h"

#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "text_util.h"

namespace tunerag {

namespace {

using nlohmann::json;

std::optional<std::string> field_text(const json& record, const std::string& name) {
  if (name.empty() || !record.contains(name)) return std::nullopt;
  const json& v = record.at(name);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  return std::nullopt;
}

bool has_key_field(std::string_view abc) {
  for (const auto& line : detail::split_lines(abc)) {
    const auto t = detail::trim(line);
    if (t.size() >= 2 && t[0] == 'K' && t[1] == ':') return true;
  }
  return false;
}

}  // namespace

CorpusEntry CorpusEntry::create(std::string id, std::string title, TagSet tags, std::string abc) {
  CorpusEntry e;
  e.id = std::move(id);
  e.title = std::move(title);
  e.tags = std::move(tags);
  e.abc = std::move(abc);
  try {
    e.parsed = abc::parse_tune(e.abc);
    e.canonical = abc::normalize(*e.parsed);
  } catch (const abc::ParseError& err) {
    e.parse_error = err.what();
  }
  return e;
}

bool operator==(const CorpusEntry& a, const CorpusEntry& b) {
  if (a.parsed.has_value() != b.parsed.has_value()) return false;
  if (a.parsed && !abc::structurally_equal(*a.parsed, *b.parsed)) return false;
  return a.id == b.id && a.title == b.title && a.tags == b.tags && a.abc == b.abc &&
         a.parse_error == b.parse_error && a.canonical == b.canonical;
}

CorpusIndex CorpusIndex::build(std::vector<CorpusEntry> entries) {
  CorpusIndex index;
  for (auto& e : entries) {
    if (index.entries_.count(e.id)) throw CorpusError(CorpusErrorCode::kDuplicateId, "duplicate entry id '" + e.id + "'");
    std::string id = e.id;
    index.entries_.emplace(std::move(id), std::move(e));
  }
  // entries_ iterates in ascending id order, so every list below is sorted.
  for (const auto& [id, e] : index.entries_) {
    for (const auto& tag : e.tags) index.vocabulary_.insert(tag);
    if (e.retrievable()) {
      for (const auto& tag : e.tags) index.inverted_[tag].push_back(id);
    }
    if (e.parsed) index.canonical_[e.canonical].push_back(id);
  }
  return index;
}

const CorpusEntry* CorpusIndex::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::map<TagFamily, std::vector<std::string>> CorpusIndex::vocabulary_by_family() const {
  std::map<TagFamily, std::vector<std::string>> out;
  out[TagFamily::kTuneType];
  out[TagFamily::kMode];
  out[TagFamily::kMeter];
  for (const auto& tag : vocabulary_) out[tag_family(tag)].push_back(tag);
  return out;
}

std::optional<std::string> CorpusIndex::contains_duplicate(const abc::Tune& tune) const {
  auto it = canonical_.find(abc::normalize(tune));
  if (it == canonical_.end() || it->second.empty()) return std::nullopt;
  return it->second.front();
}

bool operator==(const CorpusIndex& a, const CorpusIndex& b) {
  return a.entries_ == b.entries_ && a.vocabulary_ == b.vocabulary_ && a.inverted_ == b.inverted_ &&
         a.canonical_ == b.canonical_;
}

FieldMapping FieldMapping::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CorpusError(CorpusErrorCode::kBadMapping, std::string("mapping is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("fields") || !doc["fields"].is_object()) {
    throw CorpusError(CorpusErrorCode::kBadMapping, "mapping needs a \"fields\" object");
  }
  FieldMapping m;
  const json& f = doc["fields"];
  auto get = [&f](const char* key) { return f.contains(key) && f[key].is_string() ? f[key].get<std::string>() : ""; };
  m.id = get("id");
  m.title = get("title");
  m.type = get("type");
  m.mode = get("mode");
  m.meter = get("meter");
  m.abc = get("abc");
  if (m.abc.empty()) throw CorpusError(CorpusErrorCode::kBadMapping, "mapping must name the abc field");
  if (doc.contains("default_unit_length")) {
    auto l = Rational::parse(doc["default_unit_length"].is_string() ? doc["default_unit_length"].get<std::string>() : "");
    if (!l || *l <= Rational(0)) throw CorpusError(CorpusErrorCode::kBadMapping, "bad default_unit_length");
    m.default_unit_length = *l;
  }
  return m;
}

FieldMapping FieldMapping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError(CorpusErrorCode::kIo, "cannot open mapping file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::optional<std::string> mode_tag_from_key(std::string_view key) {
  auto t = detail::trim(key);
  if (t.empty()) return std::nullopt;
  if (t.front() >= 'A' && t.front() <= 'G') {
    t.remove_prefix(1);
    if (!t.empty() && (t.front() == '#' || t.front() == 'b')) t.remove_prefix(1);
    t = detail::trim(t);
    if (t.empty()) return abc::to_string(abc::Mode::kMajor);
  }
  if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; })) {
    return std::nullopt;
  }
  auto mode = abc::parse_mode(t);
  if (!mode) return std::nullopt;
  return abc::to_string(*mode);
}

IngestResult ingest(std::istream& records, const FieldMapping& mapping) {
  std::vector<CorpusEntry> entries;
  IngestReport report;
  std::map<std::string, std::size_t> seen_ids;
  std::string line;
  std::size_t record_no = 0;
  while (std::getline(records, line)) {
    if (detail::trim(line).empty()) continue;
    const std::size_t ordinal = record_no++;
    const std::string where = "record " + std::to_string(ordinal);

    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception&) {
      ++report.skipped;
      report.notes.push_back(where + ": not valid JSON (skipped)");
      continue;
    }
    if (!record.is_object()) {
      ++report.skipped;
      report.notes.push_back(where + ": not a JSON object (skipped)");
      continue;
    }
    auto body = field_text(record, mapping.abc);
    if (!body || detail::trim(*body).empty()) {
      ++report.skipped;
      report.notes.push_back(where + ": missing abc field (skipped)");
      continue;
    }

    std::string id = field_text(record, mapping.id).value_or("entry-" + std::to_string(ordinal));
    if (seen_ids.count(id)) {
      throw CorpusError(CorpusErrorCode::kDuplicateId, where + ": duplicate id '" + id + "'");
    }
    seen_ids[id] = ordinal;

    const auto type = field_text(record, mapping.type);
    const auto mode = field_text(record, mapping.mode);
    const auto meter = field_text(record, mapping.meter);
    std::string title = field_text(record, mapping.title).value_or("");

    TagSet tags;
    if (type) tags.insert(*type);
    if (meter) tags.insert(*meter);
    if (mode) {
      if (auto m = mode_tag_from_key(*mode)) {
        tags.insert(*m);
      } else {
        report.notes.push_back(where + ": unknown mode in '" + *mode + "' (tag omitted)");
      }
    }

    std::string abc_text = *body;
    if (!has_key_field(abc_text)) {
      // Dumps often store only the tune body; rebuild a header from the record.
      std::string header = "X:1\n";
      if (!title.empty()) header += "T:" + title + "\n";
      if (type) header += "R:" + *type + "\n";
      if (meter) header += "M:" + *meter + "\n";
      header += "L:" + mapping.default_unit_length.str() + "\n";
      if (mode) header += "K:" + *mode + "\n";
      abc_text = header + abc_text;
      if (!abc_text.empty() && abc_text.back() != '\n') abc_text += '\n';
    }

    CorpusEntry entry = CorpusEntry::create(std::move(id), std::move(title), std::move(tags), std::move(abc_text));
    if (entry.title.empty() && entry.parsed && entry.parsed->header.title) entry.title = *entry.parsed->header.title;
    if (!entry.parsed) report.notes.push_back(where + ": abc not parseable: " + entry.parse_error);
    if (entry.tags.empty()) report.notes.push_back(where + ": no tags (not retrievable)");
    ++report.loaded;
    if (!entry.retrievable()) ++report.flagged;
    entries.push_back(std::move(entry));
  }
  return IngestResult{CorpusIndex::build(std::move(entries)), std::move(report)};
}

}  // namespace tunerag
