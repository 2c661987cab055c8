// Bar-fill validation.
//
// Pickup policy: the first timed bar may be short. A short bar that ends a
// section (closes with :| or is the last bar) is accepted when it adds up to
// one full bar with the short bar that opened the section (the bar after the
// nearest |:, or the first bar). A short bar opening a |: section is
// accepted under the same pairing.

#include <algorithm>

#include "tunerag/abc.h"

namespace tunerag::abc {

namespace {

bool is_timed(const Bar& bar) {
  bool any = false;
  for (const auto& ev : bar.events) {
    if (ev.kind == EventKind::kMeasureRest) return false;
    if (ev.kind == EventKind::kNote || ev.kind == EventKind::kRest) any = true;
  }
  return any;
}

bool contains_opaque(const Tune& tune, OpaqueKind kind, std::size_t& first_bar) {
  for (std::size_t i = 0; i < tune.body.size(); ++i) {
    for (const auto& ev : tune.body[i].events) {
      if (ev.kind == EventKind::kOpaque && ev.opaque_kind == kind) {
        first_bar = i;
        return true;
      }
    }
  }
  return false;
}

ValidationIssue fill_issue(IssueCode code, std::size_t bar, Rational actual, Rational expected,
                           const std::string& note = {}) {
  ValidationIssue issue;
  issue.code = code;
  issue.severity = code == IssueCode::kBarOverfull ? Severity::kError : Severity::kWarning;
  issue.bar_index = bar;
  issue.actual_fill = actual;
  issue.expected_fill = expected;
  const Rational gap = code == IssueCode::kBarOverfull ? actual - expected : expected - actual;
  issue.detail = "bar " + std::to_string(bar) + ": fill " + actual.str() + ", expected " + expected.str() +
                 (code == IssueCode::kBarOverfull ? ", excess " : ", deficit ") + gap.str() + note;
  return issue;
}

}  // namespace

std::vector<ValidationIssue> validate(const Tune& tune) {
  std::vector<ValidationIssue> issues;
  const auto& body = tune.body;

  if (!tune.header.key) {
    issues.push_back({Severity::kWarning, IssueCode::kMissingKey, std::nullopt, "no K: field", {}, {}});
  }
  for (std::size_t i = 0; i < body.size(); ++i) {
    for (const auto& ev : body[i].events) {
      if (ev.kind == EventKind::kOpaque && ev.opaque_kind == OpaqueKind::kUnknown) {
        issues.push_back({Severity::kWarning, IssueCode::kUnparseableToken, i,
                          "bar " + std::to_string(i) + ": unrecognized token '" + ev.text + "'", {}, {}});
      }
    }
  }

  const Rational unit = tune.effective_unit_length();
  std::vector<Rational> fills(body.size());
  std::vector<std::size_t> timed;
  for (std::size_t i = 0; i < body.size(); ++i) {
    fills[i] = bar_fill(body[i], unit);
    if (is_timed(body[i])) timed.push_back(i);
  }

  auto finish = [&issues] {
    std::stable_sort(issues.begin(), issues.end(), [](const ValidationIssue& a, const ValidationIssue& b) {
      const auto ka = a.bar_index ? static_cast<long long>(*a.bar_index) : -1LL;
      const auto kb = b.bar_index ? static_cast<long long>(*b.bar_index) : -1LL;
      return ka < kb;
    });
    return issues;
  };

  if (!tune.header.meter) {
    const bool has_fill = std::any_of(fills.begin(), fills.end(), [](Rational f) { return f > Rational(0); });
    if (has_fill) {
      issues.push_back({Severity::kError, IssueCode::kMissingMeter, std::nullopt,
                        "no M: field; bar fill cannot be checked", {}, {}});
    }
    return finish();
  }
  if (tune.header.meter->is_free() || timed.empty()) return finish();

  std::size_t first_tuplet = 0;
  std::size_t first_chord = 0;
  const bool has_tuplet = contains_opaque(tune, OpaqueKind::kTuplet, first_tuplet);
  const bool has_chord = contains_opaque(tune, OpaqueKind::kChord, first_chord);
  if (has_tuplet) {
    issues.push_back({Severity::kWarning, IssueCode::kSkippedTuplet, first_tuplet,
                      "tuplets present; bar fill not checked", {}, {}});
  }
  if (has_chord) {
    issues.push_back({Severity::kWarning, IssueCode::kSkippedChord, first_chord,
                      "chords present; bar fill not checked", {}, {}});
  }
  if (has_tuplet || has_chord) return finish();

  const Rational meter = tune.header.meter->value();
  const std::size_t first = timed.front();
  const std::size_t last = timed.back();
  auto is_section_end = [&](std::size_t i) { return i == last || body[i].close_barline == Barline::kRepeatEnd; };
  // Bar that opened the section containing i: nearest |: at or before i, else the first timed bar.
  auto section_start = [&](std::size_t i) {
    for (std::size_t j = i + 1; j-- > first;) {
      if (body[j].open_barline == Barline::kRepeatStart) return j;
    }
    return first;
  };
  // Bar that closes the section opened at i.
  auto section_end = [&](std::size_t i) {
    for (std::size_t j : timed) {
      if (j >= i && is_section_end(j)) return j;
    }
    return last;
  };

  for (std::size_t i : timed) {
    const Rational fill = fills[i];
    if (fill > meter) {
      issues.push_back(fill_issue(IssueCode::kBarOverfull, i, fill, meter));
      continue;
    }
    if (fill == meter || i == first) continue;

    if (body[i].open_barline == Barline::kRepeatStart) {
      const std::size_t end = section_end(i);
      if (end != i && fills[end] < meter && fill + fills[end] == meter) continue;
      issues.push_back(fill_issue(IssueCode::kBarUnderfull, i, fill, meter));
      continue;
    }
    if (is_section_end(i)) {
      const std::size_t start = section_start(i);
      const Rational credit = (start != i && fills[start] < meter && fill + fills[start] <= meter)
                                  ? fills[start]
                                  : Rational(0);
      if (credit > Rational(0) && fill + credit == meter) continue;
      const std::string note = credit > Rational(0) ? " after pickup credit " + credit.str() : "";
      issues.push_back(fill_issue(IssueCode::kBarUnderfull, i, fill, meter - credit, note));
      continue;
    }
    issues.push_back(fill_issue(IssueCode::kBarUnderfull, i, fill, meter));
  }
  return finish();
}

}  // namespace tunerag::abc
