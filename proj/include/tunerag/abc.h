#pragma once

/**
 * @file abc.h
 * @brief abc notation model: parsing, bar arithmetic, validation and
 *        canonical serialization for single-voice folk tunes.
 *
 * The supported grammar is a lenient subset of abc v2.1. Anything outside
 * it (chords, grace notes, tuplets, decorations, inline fields) is kept as
 * opaque events so that every real-world tune still loads and round-trips.
 */

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tunerag/rational.h"

namespace tunerag::abc {

enum class Accidental { kNone, kSharp, kFlat, kNatural, kDoubleSharp, kDoubleFlat };

/// A pitched note. Lowercase letters are encoded as octave_shift + 1.
struct Pitch {
  char letter = 'C';  ///< Always uppercase A-G.
  Accidental accidental = Accidental::kNone;
  int octave_shift = 0;

  friend bool operator==(const Pitch&, const Pitch&) = default;
};

/// What an opaque event stands for. Opaque events carry their source text
/// and never contribute to bar fill.
enum class OpaqueKind {
  kChord,           ///< [CEG]2
  kGrace,           ///< {g} not attached to a note
  kTuplet,          ///< (3 or (3:2:3
  kDecoration,      ///< !trill!, ~, "Am" left dangling before a barline
  kBrokenRhythm,    ///< > or <
  kInlineField,     ///< [K:G] or a body field line such as P:A
  kVariantEnding,   ///< [1 or the 2 in :|2
  kSpacer,          ///< y
  kUnknown,         ///< anything the tokenizer does not understand
};

enum class EventKind { kNote, kRest, kMeasureRest, kOpaque };

/// One timed or opaque item inside a bar.
struct NoteEvent {
  EventKind kind = EventKind::kNote;
  Pitch pitch;                  ///< Meaningful for kNote.
  char rest_symbol = 'z';       ///< 'z' or 'x' for kRest, 'Z' or 'X' for kMeasureRest.
  Rational duration{1};         ///< Multiple of the unit note length; bars for kMeasureRest.
  OpaqueKind opaque_kind = OpaqueKind::kUnknown;
  std::string text;             ///< Source text of an opaque event.
  std::string decorations;      ///< Prefix text attached to a note/rest: ~ !roll! "Am" {g} (
  std::string trailer;          ///< Suffix text: ties (-) and slur ends ()).
  bool beam_break = false;      ///< Whitespace preceded this event in the source.

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

enum class Barline { kNone, kPlain, kRepeatStart, kRepeatEnd, kDouble, kFinal };

struct Bar {
  std::vector<NoteEvent> events;
  Barline open_barline = Barline::kNone;
  Barline close_barline = Barline::kNone;
  bool line_break = false;  ///< A newline followed the closing barline.

  friend bool operator==(const Bar&, const Bar&) = default;
};

enum class MeterSymbol { kNumeric, kCommon, kCut, kFree };

/// M: field. Numerator and denominator are kept unreduced so 6/8 and 3/4
/// stay distinct.
struct Meter {
  std::int64_t numerator = 4;
  std::int64_t denominator = 4;
  MeterSymbol symbol = MeterSymbol::kNumeric;

  Rational value() const { return Rational(numerator, denominator); }
  bool is_free() const { return symbol == MeterSymbol::kFree; }
  friend bool operator==(const Meter&, const Meter&) = default;
};

enum class Mode { kMajor, kMinor, kDorian, kPhrygian, kLydian, kMixolydian, kAeolian, kLocrian, kIonian };

/// K: field.
struct Key {
  char tonic = 'C';
  Accidental accidental = Accidental::kNone;  ///< kNone, kSharp or kFlat.
  Mode mode = Mode::kMajor;
  std::string extra;  ///< Trailing clef/explicit-accidental text, kept verbatim.

  friend bool operator==(const Key&, const Key&) = default;
};

struct TuneHeader {
  std::optional<std::int64_t> reference;  ///< X:
  std::optional<std::string> title;       ///< First T:
  std::optional<std::string> rhythm;      ///< R:
  std::optional<Meter> meter;             ///< M:
  std::optional<Rational> unit_length;    ///< L:
  std::optional<Key> key;                 ///< K:
  std::vector<std::pair<char, std::string>> extra_fields;

  friend bool operator==(const TuneHeader&, const TuneHeader&) = default;
};

struct Tune {
  TuneHeader header;
  std::vector<Bar> body;
  std::string raw;

  /// L: when present, otherwise 1/8 for meters >= 3/4 (or no meter) and 1/16 below.
  Rational effective_unit_length() const;
};

/// Header and body equality; the raw source text is ignored.
bool structurally_equal(const Tune& a, const Tune& b);

enum class Severity { kError, kWarning };

enum class IssueCode {
  kBarOverfull,
  kBarUnderfull,
  kMissingMeter,
  kMissingKey,
  kUnparseableToken,
  kSkippedTuplet,
  kSkippedChord,
};

struct ValidationIssue {
  Severity severity = Severity::kWarning;
  IssueCode code = IssueCode::kBarUnderfull;
  std::optional<std::size_t> bar_index;
  std::string detail;
  std::optional<Rational> expected_fill;  ///< Fill issues only.
  std::optional<Rational> actual_fill;

  /// expected - actual for fill issues (negative when overfull).
  std::optional<Rational> deficit() const {
    if (!expected_fill || !actual_fill) return std::nullopt;
    return *expected_fill - *actual_fill;
  }

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

enum class ParseErrorCode { kEmptyInput, kNoMusicContent };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ParseErrorCode code() const { return code_; }

 private:
  ParseErrorCode code_;
};

/// Parses one tune. Unsupported tokens become opaque events.
/// Throws ParseError for empty input or text with neither a K: field nor a note.
Tune parse_tune(std::string_view source);

/// Exact sum of timed event durations times `unit_length`.
/// Opaque events and multi-measure rests contribute nothing.
Rational bar_fill(const Bar& bar, Rational unit_length);

/// Bar-fill and header checks, ordered by bar index.
std::vector<ValidationIssue> validate(const Tune& tune);

/// Full abc text that reparses to a structurally equal tune.
std::string serialize(const Tune& tune);

/// Canonical text used for exact-copy detection: no X:/T:/R:/extra fields,
/// headers M, L, K in that order, single-line body without beam spacing.
std::string normalize(const Tune& tune);

std::string to_string(Accidental accidental);
std::string to_string(Mode mode);
std::string to_string(Barline barline);
std::string to_string(Severity severity);
std::string to_string(IssueCode code);
std::string to_string(const Meter& meter);
std::string to_string(const Key& key);
std::string to_string(const Pitch& pitch);

/// Accepts full names and the usual three-letter abbreviations, any case.
std::optional<Mode> parse_mode(std::string_view text);
/// Parses a K: value such as "Dmajor", "D major", "Ador", "F#m".
std::optional<Key> parse_key(std::string_view text);
/// Parses an M: value: "6/8", "C", "C|", "none".
std::optional<Meter> parse_meter(std::string_view text);

}  // namespace tunerag::abc
