// Index file layout:
//
//   TUNERAG-INDEX <version> <crc32 hex> <payload bytes>\n
//   <payload: JSON {"entries": [...]}>
//
// Parsed tunes and lookup tables are rebuilt on load.

#include <fstream>
#include <sstream>

#include <zlib.h>

#include <json.hpp>

#include "tunerag/corpus.h"

namespace tunerag {

namespace {

constexpr std::string_view kMagic = "TUNERAG-INDEX";

std::uint32_t checksum(const std::string& payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void corrupt(const std::string& why) { throw CorpusError(CorpusErrorCode::kCorruptFile, "corrupt index: " + why); }

}  // namespace

void save_index(const CorpusIndex& index, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& [id, e] : index.entries()) {
    nlohmann::ordered_json item;
    item["id"] = e.id;
    item["title"] = e.title;
    item["tags"] = std::vector<std::string>(e.tags.begin(), e.tags.end());
    item["abc"] = e.abc;
    doc["entries"].push_back(std::move(item));
  }
  const std::string payload = doc.dump();
  char crc_hex[9];
  std::snprintf(crc_hex, sizeof crc_hex, "%08x", checksum(payload));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError(CorpusErrorCode::kIo, "cannot write index file " + path.string());
  out << kMagic << ' ' << kIndexFormatVersion << ' ' << crc_hex << ' ' << payload.size() << '\n' << payload;
  if (!out) throw CorpusError(CorpusErrorCode::kIo, "write failed for " + path.string());
}

CorpusIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError(CorpusErrorCode::kIo, "cannot open index file " + path.string());
  std::string header;
  if (!std::getline(in, header)) corrupt("missing header");

  std::istringstream fields(header);
  std::string magic;
  std::string version_text;
  std::string crc_text;
  std::size_t length = 0;
  if (!(fields >> magic >> version_text >> crc_text >> length) || magic != kMagic) corrupt("bad header line");
  int version = 0;
  try {
    version = std::stoi(version_text);
  } catch (const std::exception&) {
    corrupt("bad version field");
  }
  if (version != kIndexFormatVersion) {
    throw CorpusError(CorpusErrorCode::kVersionMismatch, "index format version " + version_text + ", expected " +
                                                             std::to_string(kIndexFormatVersion));
  }

  std::stringstream rest;
  rest << in.rdbuf();
  const std::string payload = rest.str();
  if (payload.size() != length) corrupt("payload length mismatch");
  char crc_hex[9];
  std::snprintf(crc_hex, sizeof crc_hex, "%08x", checksum(payload));
  if (crc_text != crc_hex) corrupt("checksum mismatch");

  std::vector<CorpusEntry> entries;
  try {
    const auto doc = nlohmann::json::parse(payload);
    for (const auto& item : doc.at("entries")) {
      TagSet tags;
      for (const auto& t : item.at("tags")) tags.insert(t.get<std::string>());
      entries.push_back(CorpusEntry::create(item.at("id").get<std::string>(), item.at("title").get<std::string>(),
                                            std::move(tags), item.at("abc").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    corrupt(e.what());
  }
  return CorpusIndex::build(std::move(entries));
}

}  // namespace tunerag
