#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

#include "lemcts/util.hpp"

namespace lemcts {

// The sentence marker a final reasoning step uses to state its result.
inline constexpr std::string_view kAnswerMarker = "The answer is";

inline bool has_answer_marker(std::string_view text) {
  return text.find(kAnswerMarker) != std::string_view::npos;
}

namespace detail {

// Shortest decimal string that parses back to exactly `v`.
inline std::string shortest_roundtrip(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline bool parse_number(std::string_view s, double* out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

inline bool is_currency_symbol(char c) { return c == '$'; }

}  // namespace detail

/**
 * Canonicalize an answer string: trim, drop commas and currency markers,
 * strip trailing periods, and reduce numeric strings to a canonical decimal
 * form ("3.50" -> "3.5", "70,000" -> "70000"). Idempotent.
 */
inline std::string normalize_answer(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw) {
    if (c == ',' || c == '\\') continue;  // thousands separators, escapes
    s += c;
  }
  std::string_view v = trim(s);
  while (!v.empty() && detail::is_currency_symbol(v.front())) v.remove_prefix(1);
  while (!v.empty() && (v.back() == '.' || v.back() == '$')) v.remove_suffix(1);
  v = trim(v);

  double num = 0.0;
  if (detail::parse_number(v, &num)) {
    if (num == 0.0) return "0";  // collapse -0
    double ip = 0.0;
    if (std::modf(num, &ip) == 0.0 && std::fabs(num) < 1e15) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(num));
      return buf;
    }
    return detail::shortest_roundtrip(num);
  }
  return std::string(v);
}

/**
 * Pull the stated answer out of solution text. The last "The answer is X"
 * sentence wins; when no marker is present, fall back to the last number-like
 * token. Returns nothing when neither exists.
 */
inline std::optional<std::string> extract_answer(std::string_view text) {
  size_t pos = text.rfind(kAnswerMarker);
  if (pos != std::string_view::npos) {
    std::string_view rest = text.substr(pos + kAnswerMarker.size());
    size_t eol = rest.find('\n');
    if (eol != std::string_view::npos) rest = rest.substr(0, eol);
    std::string norm = normalize_answer(rest);
    if (!norm.empty()) return norm;
  }

  // Fallback: scan for the last token that looks like a number (commas and a
  // leading sign allowed).
  std::optional<std::string> last;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    bool sign = (c == '-' || c == '+') && i + 1 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (std::isdigit(static_cast<unsigned char>(c)) || sign) {
      size_t j = i + (sign ? 1 : 0);
      bool seen_dot = false;
      while (j < text.size()) {
        char d = text[j];
        if (std::isdigit(static_cast<unsigned char>(d)) || d == ',') {
          ++j;
        } else if (d == '.' && !seen_dot && j + 1 < text.size() &&
                   std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
          seen_dot = true;
          ++j;
        } else {
          break;
        }
      }
      last = normalize_answer(text.substr(i, j - i));
      i = j;
    } else {
      ++i;
    }
  }
  return last;
}

/**
 * Exact match after normalization; numeric pairs compare within relative
 * tolerance 1e-6. Symbolic equivalence ("0.5" vs "1/2") is out of scope.
 */
inline bool grade(const std::optional<std::string>& pred, const std::string& gold) {
  if (!pred) return false;
  std::string a = normalize_answer(*pred);
  std::string b = normalize_answer(gold);
  if (a == b) return true;
  double x = 0.0, y = 0.0;
  if (detail::parse_number(a, &x) && detail::parse_number(b, &y)) {
    double scale = std::max(std::fabs(x), std::fabs(y));
    return std::fabs(x - y) <= 1e-6 * scale;
  }
  return false;
}

}  // namespace lemcts
