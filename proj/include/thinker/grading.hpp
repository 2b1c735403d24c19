#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace thinker::grading {

/// Exact rational with a positive denominator, always in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  bool operator==(const Rational&) const = default;

  std::string to_string() const;
};

/// Parses "[+-]digits[.digits]" or "[+-]digits / digits". Returns nullopt
/// for anything else, a zero denominator, or values that overflow int64.
std::optional<Rational> parse_rational(std::string_view text);

/// An answer as captured from model output (or given as ground truth).
struct ExtractedAnswer {
  std::string raw;
  std::string canonical;
  std::optional<Rational> numeric;

  bool operator==(const ExtractedAnswer&) const = default;
};

enum class Verdict { Yes, No, Malformed };

std::string_view to_string(Verdict v);

/// Builds an ExtractedAnswer from plain text (used for ground truth).
ExtractedAnswer make_answer(std::string_view raw);

/// Content of the last balanced \boxed{...} in `text`. Brace matching is
/// nesting-aware and treats \{ and \} as literal characters.
std::optional<ExtractedAnswer> extract_boxed(std::string_view text);

/// Canonical form of an answer string. Each pass trims, strips one outer
/// $...$ pair, deletes \left and \right, deletes the thin-space macros
/// \, \; \!, collapses whitespace runs and strips one trailing period.
/// Passes repeat until the string stops changing, so the result is a
/// fixed point: normalize(normalize(s)) == normalize(s).
std::string normalize(std::string_view raw);

/// Exact rational equality when both sides are numeric, otherwise
/// case-sensitive equality of canonical forms.
///
/// Extension point: swap this for a symbolic checker to grade surd or
/// algebraic forms; everything downstream only sees the boolean.
bool answers_equal(const ExtractedAnswer& a, const ExtractedAnswer& b);
bool answers_equal(const ExtractedAnswer& a, std::string_view truth);

/// Yes/No from the last boxed content, case-insensitive; anything else
/// (including no box at all) is Malformed.
Verdict extract_verdict(std::string_view text);

}  // namespace thinker::grading
