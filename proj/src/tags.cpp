#include "tunerag/tags.h"

#include "text_util.h"

namespace tunerag {

TagSet::TagSet(std::initializer_list<std::string_view> tags) {
  for (auto t : tags) insert(t);
}

std::string TagSet::normalize(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : detail::trim(raw)) {
    if (detail::is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool TagSet::insert(std::string_view raw) {
  std::string tag = normalize(raw);
  if (tag.empty()) return false;
  tags_.insert(std::move(tag));
  return true;
}

bool TagSet::contains(std::string_view raw) const { return tags_.count(normalize(raw)) > 0; }

std::string TagSet::join(std::string_view separator) const {
  std::string out;
  for (const auto& t : tags_) {
    if (!out.empty()) out += separator;
    out += t;
  }
  return out;
}

TagFamily tag_family(std::string_view tag) {
  static const std::set<std::string_view> kModes = {"major",      "minor",   "dorian",  "phrygian", "lydian",
                                                    "mixolydian", "aeolian", "locrian", "ionian"};
  const auto slash = tag.find('/');
  if (slash != std::string_view::npos && slash > 0 && slash + 1 < tag.size()) {
    const auto digits = [](std::string_view s) {
      return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (digits(tag.substr(0, slash)) && digits(tag.substr(slash + 1))) return TagFamily::kMeter;
  }
  if (kModes.count(tag)) return TagFamily::kMode;
  return TagFamily::kTuneType;
}

std::string to_string(TagFamily family) {
  switch (family) {
    case TagFamily::kTuneType: return "type";
    case TagFamily::kMode: return "mode";
    case TagFamily::kMeter: return "meter";
  }
  return "type";
}

}  // namespace tunerag
