#pragma once

// Small string helpers shared by the library sources. Not part of the
// public headers.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace tunerag::detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Lines split on '\n' after "\r\n" and lone '\r' have been folded to '\n'.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::string folded;
  folded.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      folded.push_back('\n');
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      folded.push_back(text[i]);
    }
  }
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const auto nl = folded.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(folded.substr(start));
      break;
    }
    lines.push_back(folded.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace tunerag::detail
