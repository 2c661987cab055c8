#include "tunerag/rational.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>

namespace tunerag {

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::string Rational::decimal(int max_places) const {
  // Count the places needed for an exact expansion: den must be 2^a * 5^b.
  std::int64_t rest = den_;
  int twos = 0;
  int fives = 0;
  while (rest % 2 == 0) {
    rest /= 2;
    ++twos;
  }
  while (rest % 5 == 0) {
    rest /= 5;
    ++fives;
  }
  int places = max_places;
  if (rest == 1) places = std::min(max_places, std::max(twos, fives));

  __int128 scale = 1;
  for (int i = 0; i < places; ++i) scale *= 10;
  const bool negative = num_ < 0;
  const __int128 magnitude = negative ? -static_cast<__int128>(num_) : num_;
  // Half-up rounding of |num| * 10^places / den.
  const __int128 scaled = (magnitude * scale * 2 + den_) / (2 * static_cast<__int128>(den_));

  const __int128 whole = scaled / scale;
  __int128 frac = scaled % scale;
  std::string out = negative && scaled != 0 ? "-" : "";
  out += std::to_string(static_cast<long long>(whole));
  if (places > 0 && frac != 0) {
    std::string digits(static_cast<std::size_t>(places), '0');
    for (int i = places - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(frac % 10));
      frac /= 10;
    }
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

std::optional<Rational> Rational::parse(std::string_view text) {
  auto to_int = [](std::string_view s) -> std::optional<std::int64_t> {
    std::int64_t v = 0;
    if (s.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    auto v = to_int(text);
    if (!v) return std::nullopt;
    return Rational(*v);
  }
  auto n = to_int(text.substr(0, slash));
  auto d = to_int(text.substr(slash + 1));
  if (!n || !d || *d <= 0) return std::nullopt;
  return Rational(*n, *d);
}

}  // namespace tunerag
