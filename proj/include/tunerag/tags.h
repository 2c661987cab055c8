#pragma once

#include <initializer_list>
#include <set>
#include <string>
#include <string_view>

namespace tunerag {

/// Normalized set of tag strings: lowercase, trimmed, inner whitespace
/// collapsed to one space. Empty strings are never members.
class TagSet {
 public:
  using const_iterator = std::set<std::string>::const_iterator;

  TagSet() = default;
  TagSet(std::initializer_list<std::string_view> tags);

  static std::string normalize(std::string_view raw);

  /// Inserts the normalized form; returns false when it normalizes to "".
  bool insert(std::string_view raw);
  bool contains(std::string_view raw) const;

  std::size_t size() const { return tags_.size(); }
  bool empty() const { return tags_.empty(); }
  const_iterator begin() const { return tags_.begin(); }
  const_iterator end() const { return tags_.end(); }
  const std::set<std::string>& items() const { return tags_; }

  std::string join(std::string_view separator = ", ") const;

  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::set<std::string> tags_;
};

enum class TagFamily { kTuneType, kMode, kMeter };

/// Meter tags look like "6/8", mode tags are mode names, anything else is a tune type.
TagFamily tag_family(std::string_view tag);
std::string to_string(TagFamily family);

}  // namespace tunerag
