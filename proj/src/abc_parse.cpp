// Lenient abc tokenizer and header parser.

#include <algorithm>
#include <charconv>
#include <cctype>

#include "tunerag/abc.h"
#include "text_util.h"

namespace tunerag::abc {

namespace {

using detail::trim;

bool is_field_line(std::string_view line) {
  // "A:|" and "d::" are music, not fields.
  if (line.size() < 2 || !std::isalpha(static_cast<unsigned char>(line[0])) || line[1] != ':') return false;
  return line.size() == 2 || (line[2] != '|' && line[2] != ':');
}

bool is_note_letter(char c) { return (c >= 'A' && c <= 'G') || (c >= 'a' && c <= 'g'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Length multipliers beyond this are treated as garbage, keeping bar sums far from overflow.
constexpr std::int64_t kMaxLengthTerm = 1 << 16;

/// Drops a trailing % comment (an escaped \% is kept).
std::string_view strip_comment(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '%' && (i == 0 || line[i - 1] != '\\')) return line.substr(0, i);
  }
  return line;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

class BodyTokenizer {
 public:
  void feed_line(std::string_view line) {
    line = strip_comment(line);
    bool continued = false;
    std::size_t end = line.size();
    {
      auto t = trim(line);
      if (!t.empty() && t.back() == '\\') {
        continued = true;
        end = line.rfind('\\');
      }
    }
    text_ = line.substr(0, end);
    pos_ = 0;
    while (pos_ < text_.size()) step();
    if (!continued) newline();
  }

  void feed_field_line(std::string_view line) {
    NoteEvent ev;
    ev.kind = EventKind::kOpaque;
    ev.opaque_kind = OpaqueKind::kInlineField;
    ev.text = "[" + std::string(trim(strip_comment(line))) + "]";
    push(std::move(ev));
    newline();
  }

  std::vector<Bar> finish() {
    flush_decorations();
    if (!current_.events.empty()) {
      current_.close_barline = Barline::kNone;
      bars_.push_back(std::move(current_));
    }
    return std::move(bars_);
  }

  bool saw_timed_event() const { return saw_timed_; }

 private:
  char peek(std::size_t offset = 0) const {
    return pos_ + offset < text_.size() ? text_[pos_ + offset] : '\0';
  }

  void newline() {
    saw_space_ = true;
    if (current_.events.empty() && pending_decorations_.empty() && !bars_.empty() && bar_just_closed_) {
      bars_.back().line_break = true;
    }
  }

  void push(NoteEvent ev) {
    ev.beam_break = saw_space_ && !current_.events.empty();
    if (ev.decorations.empty()) ev.decorations = std::move(pending_decorations_);
    pending_decorations_.clear();
    if (ev.kind != EventKind::kOpaque) saw_timed_ = true;
    if (current_.events.empty()) current_.open_barline = pending_open_;
    current_.events.push_back(std::move(ev));
    saw_space_ = false;
    bar_just_closed_ = false;
  }

  void push_opaque(OpaqueKind kind, std::string text) {
    NoteEvent ev;
    ev.kind = EventKind::kOpaque;
    ev.opaque_kind = kind;
    ev.text = std::move(text);
    push(std::move(ev));
  }

  void flush_decorations() {
    if (pending_decorations_.empty()) return;
    std::string text = std::move(pending_decorations_);
    pending_decorations_.clear();
    push_opaque(OpaqueKind::kDecoration, std::move(text));
  }

  void attach_trailer(char c) {
    if (!current_.events.empty() && pending_decorations_.empty()) {
      current_.events.back().trailer.push_back(c);
      return;
    }
    push_opaque(OpaqueKind::kDecoration, std::string(1, c));
  }

  /// Reads a duration suffix at pos_. Returns nullopt for zero-valued forms.
  std::optional<Rational> read_duration() {
    std::int64_t num = 1;
    std::size_t start = pos_;
    while (is_digit(peek())) ++pos_;
    if (pos_ > start) num = parse_int(text_.substr(start, pos_ - start)).value_or(0);
    std::int64_t den = 1;
    if (peek() == '/') {
      std::size_t slashes = 0;
      while (peek() == '/') {
        ++slashes;
        ++pos_;
      }
      if (slashes == 1 && is_digit(peek())) {
        std::size_t dstart = pos_;
        while (is_digit(peek())) ++pos_;
        den = parse_int(text_.substr(dstart, pos_ - dstart)).value_or(0);
      } else {
        den = std::int64_t{1} << std::min<std::size_t>(slashes, 30);
      }
    }
    if (num <= 0 || den <= 0 || num > kMaxLengthTerm || den > kMaxLengthTerm) return std::nullopt;
    return Rational(num, den);
  }

  void read_barline() {
    int lead = 0;
    while (peek() == ':') {
      ++lead;
      ++pos_;
    }
    std::string core;
    if (peek() == '[' && peek(1) == '|') {
      core = "[|";
      pos_ += 2;
    } else {
      while (peek() == '|') {
        core.push_back('|');
        ++pos_;
      }
    }
    if (!core.empty() && peek() == ']') {
      core.push_back(']');
      ++pos_;
    }
    int trail = 0;
    while (peek() == ':') {
      ++trail;
      ++pos_;
    }

    Barline close = Barline::kPlain;
    Barline open = Barline::kPlain;
    if ((lead > 0 && trail > 0) || core.empty()) {
      close = Barline::kRepeatEnd;
      open = Barline::kRepeatStart;
    } else if (lead > 0) {
      close = open = Barline::kRepeatEnd;
    } else if (trail > 0) {
      close = open = Barline::kRepeatStart;
    } else if (core.find(']') != std::string::npos) {
      close = open = Barline::kFinal;
    } else if (core == "[|" || core.size() >= 2) {
      close = open = Barline::kDouble;
    }

    flush_decorations();
    const bool only_fields =
        !current_.events.empty() && std::all_of(current_.events.begin(), current_.events.end(), [](const NoteEvent& ev) {
          return ev.kind == EventKind::kOpaque && ev.opaque_kind == OpaqueKind::kInlineField;
        });
    if (only_fields) {
      // A field line before a barline belongs to the bar that barline opens.
      current_.open_barline = open;
    } else if (!current_.events.empty()) {
      current_.close_barline = close;
      bars_.push_back(std::move(current_));
      current_ = Bar{};
      bar_just_closed_ = true;
    }
    pending_open_ = open;
    saw_space_ = false;

    if (is_digit(peek())) {
      std::size_t dstart = pos_;
      while (is_digit(peek()) || peek() == ',' || peek() == '-') ++pos_;
      push_opaque(OpaqueKind::kVariantEnding, "[" + std::string(text_.substr(dstart, pos_ - dstart)));
    }
  }

  /// Reads a delimited run such as !trill! or "Am". Returns false when the
  /// closing delimiter is missing (nothing consumed).
  bool read_delimited(char close, std::string& out) {
    const auto end = text_.find(close, pos_ + 1);
    if (end == std::string_view::npos) return false;
    out += std::string(text_.substr(pos_, end - pos_ + 1));
    pos_ = end + 1;
    return true;
  }

  void read_note_or_rest() {
    const std::size_t start = pos_;
    NoteEvent ev;
    const char c = peek();
    if (c == 'z' || c == 'x') {
      ev.kind = EventKind::kRest;
      ev.rest_symbol = c;
      ++pos_;
    } else if (c == 'Z' || c == 'X') {
      ev.kind = EventKind::kMeasureRest;
      ev.rest_symbol = c;
      ++pos_;
      std::int64_t bars = 1;
      std::size_t dstart = pos_;
      while (is_digit(peek())) ++pos_;
      if (pos_ > dstart) bars = parse_int(text_.substr(dstart, pos_ - dstart)).value_or(0);
      if (bars <= 0) {
        push_opaque(OpaqueKind::kUnknown, std::string(text_.substr(start, pos_ - start)));
        return;
      }
      ev.duration = Rational(bars);
      push(std::move(ev));
      return;
    } else {
      ev.kind = EventKind::kNote;
      if (c == '^') {
        ++pos_;
        ev.pitch.accidental = Accidental::kSharp;
        if (peek() == '^') {
          ++pos_;
          ev.pitch.accidental = Accidental::kDoubleSharp;
        }
      } else if (c == '_') {
        ++pos_;
        ev.pitch.accidental = Accidental::kFlat;
        if (peek() == '_') {
          ++pos_;
          ev.pitch.accidental = Accidental::kDoubleFlat;
        }
      } else if (c == '=') {
        ++pos_;
        ev.pitch.accidental = Accidental::kNatural;
      }
      const char letter = peek();
      if (!is_note_letter(letter)) {
        push_opaque(OpaqueKind::kUnknown, std::string(text_.substr(start, pos_ - start)));
        return;
      }
      ++pos_;
      ev.pitch.letter = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
      ev.pitch.octave_shift = std::islower(static_cast<unsigned char>(letter)) ? 1 : 0;
      while (peek() == '\'' || peek() == ',') {
        ev.pitch.octave_shift += peek() == '\'' ? 1 : -1;
        ++pos_;
      }
    }
    auto duration = read_duration();
    if (!duration) {
      push_opaque(OpaqueKind::kUnknown, std::string(text_.substr(start, pos_ - start)));
      return;
    }
    ev.duration = *duration;
    push(std::move(ev));
  }

  void read_bracket() {
    const char next = peek(1);
    if (is_digit(next)) {
      const std::size_t start = pos_;
      ++pos_;
      while (is_digit(peek()) || peek() == ',' || peek() == '-') ++pos_;
      push_opaque(OpaqueKind::kVariantEnding, std::string(text_.substr(start, pos_ - start)));
      return;
    }
    const auto end = text_.find(']', pos_);
    if (end == std::string_view::npos) {
      ++pos_;
      push_opaque(OpaqueKind::kUnknown, "[");
      return;
    }
    const std::size_t start = pos_;
    if (std::isalpha(static_cast<unsigned char>(next)) && peek(2) == ':') {
      pos_ = end + 1;
      push_opaque(OpaqueKind::kInlineField, std::string(text_.substr(start, pos_ - start)));
      return;
    }
    pos_ = end + 1;
    // Chord length suffix belongs to the chord token.
    while (is_digit(peek()) || peek() == '/') ++pos_;
    push_opaque(OpaqueKind::kChord, std::string(text_.substr(start, pos_ - start)));
  }

  void step() {
    const char c = peek();
    if (detail::is_space(c)) {
      saw_space_ = true;
      ++pos_;
      return;
    }
    if (c == '|' || (c == ':' && (peek(1) == '|' || peek(1) == ':')) || (c == '[' && peek(1) == '|')) {
      read_barline();
      return;
    }
    if (c == '[') {
      read_bracket();
      return;
    }
    if (c == '{') {
      if (!read_delimited('}', pending_decorations_)) {
        ++pos_;
        push_opaque(OpaqueKind::kUnknown, "{");
      }
      return;
    }
    if (c == '(') {
      if (is_digit(peek(1))) {
        const std::size_t start = pos_;
        ++pos_;
        while (is_digit(peek()) || (peek() == ':' && peek(1) != '|' && peek(1) != ':')) ++pos_;
        push_opaque(OpaqueKind::kTuplet, std::string(text_.substr(start, pos_ - start)));
      } else {
        pending_decorations_.push_back('(');
        ++pos_;
      }
      return;
    }
    if (c == ')' || c == '-') {
      attach_trailer(c);
      ++pos_;
      return;
    }
    if (c == '"' || c == '!' || c == '+') {
      if (!read_delimited(c, pending_decorations_)) {
        ++pos_;
        push_opaque(OpaqueKind::kUnknown, std::string(1, c));
      }
      return;
    }
    if (c == '~' || c == '.' || c == 'H' || c == 'L' || c == 'M' || c == 'O' || c == 'P' || c == 'S' ||
        c == 'T' || c == 'u' || c == 'v') {
      pending_decorations_.push_back(c);
      ++pos_;
      return;
    }
    if (c == '>' || c == '<') {
      const std::size_t start = pos_;
      while (peek() == c) ++pos_;
      push_opaque(OpaqueKind::kBrokenRhythm, std::string(text_.substr(start, pos_ - start)));
      return;
    }
    if (c == 'y') {
      ++pos_;
      push_opaque(OpaqueKind::kSpacer, "y");
      return;
    }
    if (is_note_letter(c) || c == '^' || c == '_' || c == '=' || c == 'z' || c == 'x' || c == 'Z' || c == 'X') {
      read_note_or_rest();
      return;
    }
    // Unknown byte; keep UTF-8 sequences together.
    const std::size_t start = pos_;
    ++pos_;
    while (pos_ < text_.size() && (static_cast<unsigned char>(text_[pos_]) & 0xC0) == 0x80) ++pos_;
    push_opaque(OpaqueKind::kUnknown, std::string(text_.substr(start, pos_ - start)));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Bar> bars_;
  Bar current_;
  Barline pending_open_ = Barline::kNone;
  std::string pending_decorations_;
  bool saw_space_ = false;
  bool saw_timed_ = false;
  bool bar_just_closed_ = false;
};

void apply_field(TuneHeader& header, char letter, std::string_view raw_value) {
  const std::string_view value = trim(strip_comment(raw_value));
  auto keep = [&] { header.extra_fields.emplace_back(letter, std::string(value)); };
  switch (letter) {
    case 'X':
      if (auto v = parse_int(value); v && !header.reference) {
        header.reference = *v;
        return;
      }
      break;
    case 'T':
      if (!header.title) {
        header.title = std::string(value);
        return;
      }
      break;
    case 'R':
      if (!header.rhythm) {
        header.rhythm = std::string(value);
        return;
      }
      break;
    case 'M':
      if (auto m = parse_meter(value); m && !header.meter) {
        header.meter = *m;
        return;
      }
      break;
    case 'L':
      if (auto l = Rational::parse(value); l && *l > Rational(0) && !header.unit_length) {
        header.unit_length = *l;
        return;
      }
      break;
    case 'K':
      if (auto k = parse_key(value); k && !header.key) {
        header.key = *k;
        return;
      }
      break;
    default:
      break;
  }
  keep();
}

}  // namespace

Tune parse_tune(std::string_view source) {
  if (trim(source).empty()) throw ParseError(ParseErrorCode::kEmptyInput, "empty abc input");

  Tune tune;
  tune.raw = std::string(source);
  const auto lines = detail::split_lines(source);

  std::size_t i = 0;
  bool saw_key_line = false;
  for (; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const auto t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    if (!is_field_line(t)) break;
    if (t.front() == 'X' && tune.header.reference) break;  // next tune
    apply_field(tune.header, t.front(), t.substr(2));
    if (t.front() == 'K') {
      saw_key_line = true;
      ++i;
      break;
    }
  }

  BodyTokenizer tokenizer;
  for (; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const auto t = trim(line);
    if (!t.empty() && t.front() == '%') continue;
    if (is_field_line(t)) {
      if (t.front() == 'X') break;
      tokenizer.feed_field_line(t);
      continue;
    }
    tokenizer.feed_line(line);
  }
  const bool has_notes = tokenizer.saw_timed_event();
  tune.body = tokenizer.finish();

  if (!saw_key_line && !has_notes) {
    throw ParseError(ParseErrorCode::kNoMusicContent, "no K: field and no note tokens");
  }
  return tune;
}

std::optional<Meter> parse_meter(std::string_view text) {
  const auto t = trim(text);
  if (t == "C") return Meter{4, 4, MeterSymbol::kCommon};
  if (t == "C|") return Meter{2, 2, MeterSymbol::kCut};
  if (detail::to_lower(t) == "none") return Meter{0, 1, MeterSymbol::kFree};
  const auto slash = t.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto num = parse_int(t.substr(0, slash));
  auto den = parse_int(t.substr(slash + 1));
  if (!num || !den || *num <= 0 || *den <= 0) return std::nullopt;
  if ((*den & (*den - 1)) != 0) return std::nullopt;
  return Meter{*num, *den, MeterSymbol::kNumeric};
}

std::optional<Mode> parse_mode(std::string_view text) {
  const std::string word = detail::to_lower(trim(text));
  if (word == "m") return Mode::kMinor;
  if (word.size() < 3) return std::nullopt;
  const std::string_view head = std::string_view(word).substr(0, 3);
  if (head == "maj") return Mode::kMajor;
  if (head == "min") return Mode::kMinor;
  if (head == "dor") return Mode::kDorian;
  if (head == "phr") return Mode::kPhrygian;
  if (head == "lyd") return Mode::kLydian;
  if (head == "mix") return Mode::kMixolydian;
  if (head == "aeo") return Mode::kAeolian;
  if (head == "loc") return Mode::kLocrian;
  if (head == "ion") return Mode::kIonian;
  return std::nullopt;
}

std::optional<Key> parse_key(std::string_view text) {
  auto t = trim(text);
  if (t.empty()) return std::nullopt;
  const char tonic = static_cast<char>(std::toupper(static_cast<unsigned char>(t.front())));
  if (tonic < 'A' || tonic > 'G') return std::nullopt;
  Key key;
  key.tonic = tonic;
  t.remove_prefix(1);
  if (!t.empty() && t.front() == '#') {
    key.accidental = Accidental::kSharp;
    t.remove_prefix(1);
  } else if (!t.empty() && t.front() == 'b') {
    key.accidental = Accidental::kFlat;
    t.remove_prefix(1);
  }
  const bool attached = !t.empty() && !detail::is_space(t.front());
  t = trim(t);
  std::size_t word_end = 0;
  while (word_end < t.size() && std::isalpha(static_cast<unsigned char>(t[word_end]))) ++word_end;
  const std::string_view word = t.substr(0, word_end);
  if (!word.empty()) {
    if (auto mode = parse_mode(word); mode && (word_end == t.size() || detail::is_space(t[word_end]))) {
      key.mode = *mode;
      t.remove_prefix(word_end);
    } else if (attached) {
      return std::nullopt;
    }
  } else if (attached) {
    return std::nullopt;
  }
  key.extra = std::string(trim(t));
  return key;
}

}  // namespace tunerag::abc
