#include "thinker/grading.hpp"

#include <cctype>
#include <numeric>

namespace thinker::grading {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Accumulates a run of digits into `value`; false on overflow.
bool accumulate_digits(std::string_view digits, std::int64_t& value) {
  for (char c : digits) {
    if (__builtin_mul_overflow(value, std::int64_t{10}, &value)) return false;
    if (__builtin_add_overflow(value, std::int64_t{c - '0'}, &value)) return false;
  }
  return true;
}

std::size_t digit_run(std::string_view s, std::size_t pos) {
  std::size_t end = pos;
  while (end < s.size() && is_digit(s[end])) ++end;
  return end - pos;
}

std::optional<Rational> make_rational(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    if (num == INT64_MIN || den == INT64_MIN) return std::nullopt;
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) den = 1;
  return Rational{num, den};
}

// One normalization pass; normalize() iterates this to a fixed point.
std::string normalize_once(std::string_view input) {
  std::string_view s = trim(input);
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = s.substr(1, s.size() - 2);
  }

  std::string stripped;
  stripped.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '\\' || i + 1 >= s.size()) {
      stripped.push_back(s[i++]);
      continue;
    }
    const char next = s[i + 1];
    if (next == '\\') {  // line break macro, keep verbatim
      stripped.append(s.substr(i, 2));
      i += 2;
      continue;
    }
    if (next == ',' || next == ';' || next == '!') {
      i += 2;
      continue;
    }
    bool removed = false;
    for (std::string_view word : {std::string_view{"left"}, std::string_view{"right"}}) {
      if (s.substr(i + 1, word.size()) == word) {
        const std::size_t after = i + 1 + word.size();
        if (after >= s.size() || !is_alpha(s[after])) {
          i = after;
          removed = true;
          break;
        }
      }
    }
    if (!removed) stripped.push_back(s[i++]);
  }

  std::string collapsed;
  collapsed.reserve(stripped.size());
  bool in_space = false;
  for (char c : stripped) {
    if (is_space(c)) {
      if (!in_space) collapsed.push_back(' ');
      in_space = true;
    } else {
      collapsed.push_back(c);
      in_space = false;
    }
  }

  std::string out(trim(collapsed));
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string Rational::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

std::optional<Rational> parse_rational(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) return std::nullopt;

  bool negative = false;
  std::size_t pos = 0;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    pos = 1;
  }

  const std::size_t int_len = digit_run(s, pos);
  std::int64_t num = 0;
  if (!accumulate_digits(s.substr(pos, int_len), num)) return std::nullopt;
  pos += int_len;

  std::int64_t den = 1;
  if (pos < s.size() && s[pos] == '.') {
    const std::size_t frac_len = digit_run(s, pos + 1);
    if (frac_len == 0) return std::nullopt;
    if (!accumulate_digits(s.substr(pos + 1, frac_len), num)) return std::nullopt;
    for (std::size_t k = 0; k < frac_len; ++k) {
      if (__builtin_mul_overflow(den, std::int64_t{10}, &den)) return std::nullopt;
    }
    pos += 1 + frac_len;
  } else if (int_len == 0) {
    return std::nullopt;
  } else {
    // Optional "/ denominator" for the integer form.
    std::size_t p = pos;
    while (p < s.size() && s[p] == ' ') ++p;
    if (p < s.size() && s[p] == '/') {
      ++p;
      while (p < s.size() && s[p] == ' ') ++p;
      const std::size_t den_len = digit_run(s, p);
      if (den_len == 0) return std::nullopt;
      den = 0;
      if (!accumulate_digits(s.substr(p, den_len), den)) return std::nullopt;
      pos = p + den_len;
    }
  }

  if (pos != s.size()) return std::nullopt;
  return make_rational(negative ? -num : num, den);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Yes: return "yes";
    case Verdict::No: return "no";
    case Verdict::Malformed: return "malformed";
  }
  return "malformed";
}

std::string normalize(std::string_view raw) {
  std::string current(raw);
  for (;;) {
    std::string next = normalize_once(current);
    if (next == current) return next;
    current = std::move(next);
  }
}

ExtractedAnswer make_answer(std::string_view raw) {
  ExtractedAnswer a;
  a.raw = std::string(raw);
  a.canonical = normalize(raw);
  a.numeric = parse_rational(a.canonical);
  return a;
}

std::optional<ExtractedAnswer> extract_boxed(std::string_view text) {
  static constexpr std::string_view k_macro = "\\boxed";

  // Walk occurrences from the last one backwards; the first balanced one wins.
  std::size_t search_end = text.size();
  while (search_end > 0) {
    const std::size_t start = text.rfind(k_macro, search_end - 1);
    if (start == std::string_view::npos) break;
    search_end = start;

    std::size_t i = start + k_macro.size();
    if (i < text.size() && is_alpha(text[i])) continue;  // e.g. \boxedfoo
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size() || text[i] != '{') continue;

    const std::size_t open = i;
    int depth = 1;
    ++i;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '\\') {
        i += 2;  // escaped character, including \{ and \}
        continue;
      }
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) break;
      }
      ++i;
    }
    if (depth == 0 && i < text.size()) {
      return make_answer(text.substr(open + 1, i - open - 1));
    }
  }
  return std::nullopt;
}

bool answers_equal(const ExtractedAnswer& a, const ExtractedAnswer& b) {
  if (a.numeric && b.numeric) return *a.numeric == *b.numeric;
  return a.canonical == b.canonical;
}

bool answers_equal(const ExtractedAnswer& a, std::string_view truth) { return answers_equal(a, make_answer(truth)); }

Verdict extract_verdict(std::string_view text) {
  const auto box = extract_boxed(text);
  if (!box) return Verdict::Malformed;
  const std::string v = ascii_lower(box->canonical);
  if (v == "yes") return Verdict::Yes;
  if (v == "no") return Verdict::No;
  return Verdict::Malformed;
}

}  // namespace thinker::grading
