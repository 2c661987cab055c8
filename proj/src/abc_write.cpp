// Serialization, canonical form and small helpers of the abc model.

#include <sstream>

#include "tunerag/abc.h"

namespace tunerag::abc {

namespace {

std::string duration_text(Rational d) {
  if (d == Rational(1)) return "";
  if (d.is_integer()) return std::to_string(d.num());
  if (d.num() == 1) return d.den() == 2 ? "/" : "/" + std::to_string(d.den());
  return std::to_string(d.num()) + "/" + std::to_string(d.den());
}

std::string accidental_prefix(Accidental a) {
  switch (a) {
    case Accidental::kSharp: return "^";
    case Accidental::kDoubleSharp: return "^^";
    case Accidental::kFlat: return "_";
    case Accidental::kDoubleFlat: return "__";
    case Accidental::kNatural: return "=";
    case Accidental::kNone: break;
  }
  return "";
}

std::string barline_text(Barline b) {
  switch (b) {
    case Barline::kPlain: return "|";
    case Barline::kRepeatStart: return "|:";
    case Barline::kRepeatEnd: return ":|";
    case Barline::kDouble: return "||";
    case Barline::kFinal: return "|]";
    case Barline::kNone: break;
  }
  return "";
}

std::string event_text(const NoteEvent& ev) {
  std::string out = ev.decorations;
  switch (ev.kind) {
    case EventKind::kNote:
      out += to_string(ev.pitch) + duration_text(ev.duration);
      break;
    case EventKind::kRest:
      out += std::string(1, ev.rest_symbol) + duration_text(ev.duration);
      break;
    case EventKind::kMeasureRest:
      out += std::string(1, ev.rest_symbol) + duration_text(ev.duration);
      break;
    case EventKind::kOpaque:
      out += ev.text;
      break;
  }
  return out + ev.trailer;
}

bool joins_barline(char c) { return c == '|' || c == ':' || c == ']' || c == '[' || (c >= '0' && c <= '9'); }

bool is_unknown(const NoteEvent& ev) {
  return ev.kind == EventKind::kOpaque && ev.opaque_kind == OpaqueKind::kUnknown;
}

/// Appends one bar body. Without beams, unknown tokens stay space-separated
/// so they cannot fuse with their neighbours on reparse.
void write_events(std::string& out, const Bar& bar, bool keep_beams) {
  for (std::size_t j = 0; j < bar.events.size(); ++j) {
    const NoteEvent& ev = bar.events[j];
    const std::string text = event_text(ev);
    bool space = false;
    if (j > 0) {
      space = keep_beams ? ev.beam_break : (is_unknown(ev) || is_unknown(bar.events[j - 1]));
    } else if (!out.empty() && !text.empty()) {
      space = joins_barline(out.back()) && joins_barline(text.front());
    }
    if (space) out += ' ';
    out += text;
  }
}

std::string write_body(const std::vector<Bar>& body, bool keep_layout) {
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const Bar& bar = body[i];
    if (i == 0) {
      out += barline_text(bar.open_barline);
    } else if (bar.open_barline != body[i - 1].close_barline && bar.open_barline != Barline::kNone) {
      out += ' ';
      out += barline_text(bar.open_barline);
    }
    write_events(out, bar, keep_layout);
    if (bar.close_barline != Barline::kNone && !out.empty() && (out.back() == ':' || out.back() == '[')) out += ' ';
    out += barline_text(bar.close_barline);
    if (keep_layout && bar.line_break && i + 1 < body.size()) out += '\n';
  }
  return out;
}

}  // namespace

Rational Tune::effective_unit_length() const {
  if (header.unit_length) return *header.unit_length;
  if (!header.meter || header.meter->is_free()) return Rational(1, 8);
  return header.meter->value() >= Rational(3, 4) ? Rational(1, 8) : Rational(1, 16);
}

bool structurally_equal(const Tune& a, const Tune& b) { return a.header == b.header && a.body == b.body; }

Rational bar_fill(const Bar& bar, Rational unit_length) {
  Rational total;
  for (const auto& ev : bar.events) {
    if (ev.kind == EventKind::kNote || ev.kind == EventKind::kRest) total += ev.duration;
  }
  return total * unit_length;
}

std::string serialize(const Tune& tune) {
  const TuneHeader& h = tune.header;
  std::ostringstream out;
  if (h.reference) out << "X:" << *h.reference << '\n';
  if (h.title) out << "T:" << *h.title << '\n';
  if (h.rhythm) out << "R:" << *h.rhythm << '\n';
  if (h.meter) out << "M:" << to_string(*h.meter) << '\n';
  if (h.unit_length) out << "L:" << h.unit_length->str() << '\n';
  for (const auto& [letter, value] : h.extra_fields) {
    if (letter != 'K') out << letter << ':' << value << '\n';
  }
  if (h.key) {
    out << "K:" << to_string(*h.key) << '\n';
  } else {
    for (const auto& [letter, value] : h.extra_fields) {
      if (letter == 'K') out << "K:" << value << '\n';
    }
  }
  const std::string body = write_body(tune.body, true);
  if (!body.empty()) out << body << '\n';
  return out.str();
}

std::string normalize(const Tune& tune) {
  const TuneHeader& h = tune.header;
  std::string out;
  if (h.meter) out += "M:" + to_string(*h.meter) + "\n";
  out += "L:" + tune.effective_unit_length().str() + "\n";
  if (h.key) out += "K:" + to_string(*h.key) + "\n";
  out += write_body(tune.body, false);
  out += "\n";
  return out;
}

std::string to_string(Accidental accidental) {
  switch (accidental) {
    case Accidental::kNone: return "none";
    case Accidental::kSharp: return "sharp";
    case Accidental::kFlat: return "flat";
    case Accidental::kNatural: return "natural";
    case Accidental::kDoubleSharp: return "double-sharp";
    case Accidental::kDoubleFlat: return "double-flat";
  }
  return "none";
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kMajor: return "major";
    case Mode::kMinor: return "minor";
    case Mode::kDorian: return "dorian";
    case Mode::kPhrygian: return "phrygian";
    case Mode::kLydian: return "lydian";
    case Mode::kMixolydian: return "mixolydian";
    case Mode::kAeolian: return "aeolian";
    case Mode::kLocrian: return "locrian";
    case Mode::kIonian: return "ionian";
  }
  return "major";
}

std::string to_string(Barline barline) {
  switch (barline) {
    case Barline::kNone: return "none";
    case Barline::kPlain: return "plain";
    case Barline::kRepeatStart: return "repeat_start";
    case Barline::kRepeatEnd: return "repeat_end";
    case Barline::kDouble: return "double";
    case Barline::kFinal: return "final";
  }
  return "none";
}

std::string to_string(Severity severity) { return severity == Severity::kError ? "error" : "warning"; }

std::string to_string(IssueCode code) {
  switch (code) {
    case IssueCode::kBarOverfull: return "BAR_OVERFULL";
    case IssueCode::kBarUnderfull: return "BAR_UNDERFULL";
    case IssueCode::kMissingMeter: return "MISSING_METER";
    case IssueCode::kMissingKey: return "MISSING_KEY";
    case IssueCode::kUnparseableToken: return "UNPARSEABLE_TOKEN";
    case IssueCode::kSkippedTuplet: return "SKIPPED_TUPLET";
    case IssueCode::kSkippedChord: return "SKIPPED_CHORD";
  }
  return "UNKNOWN";
}

std::string to_string(const Meter& meter) {
  switch (meter.symbol) {
    case MeterSymbol::kCommon: return "C";
    case MeterSymbol::kCut: return "C|";
    case MeterSymbol::kFree: return "none";
    case MeterSymbol::kNumeric: break;
  }
  return std::to_string(meter.numerator) + "/" + std::to_string(meter.denominator);
}

std::string to_string(const Key& key) {
  static constexpr const char* kAbbrev[] = {"maj", "min", "dor", "phr", "lyd", "mix", "aeo", "loc", "ion"};
  std::string out(1, key.tonic);
  if (key.accidental == Accidental::kSharp) out += '#';
  if (key.accidental == Accidental::kFlat) out += 'b';
  out += kAbbrev[static_cast<int>(key.mode)];
  if (!key.extra.empty()) out += " " + key.extra;
  return out;
}

std::string to_string(const Pitch& pitch) {
  std::string out = accidental_prefix(pitch.accidental);
  if (pitch.octave_shift >= 1) {
    out += static_cast<char>(pitch.letter - 'A' + 'a');
    out.append(static_cast<std::size_t>(pitch.octave_shift - 1), '\'');
  } else {
    out += pitch.letter;
    out.append(static_cast<std::size_t>(-pitch.octave_shift), ',');
  }
  return out;
}

}  // namespace tunerag::abc
