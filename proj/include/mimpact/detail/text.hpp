#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mimpact::detail {

/// Shortest round-trip decimal representation, independent of the C locale.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Parses a non-negative decimal "123.456" into an integer count of
/// 10^-scale units without going through floating point. Digits beyond
/// `scale` are truncated.
inline std::optional<std::int64_t> parse_fixed_point(std::string_view s, int scale) {
  s = trim(s);
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  const auto dot = s.find('.');
  const auto int_part = s.substr(0, dot);
  std::int64_t whole = 0;
  if (!int_part.empty()) {
    auto parsed = parse_int(int_part);
    if (!parsed || int_part.front() == '-') return std::nullopt;
    whole = *parsed;
  }
  std::int64_t frac = 0;
  int digits = 0;
  if (dot != std::string_view::npos) {
    for (char c : s.substr(dot + 1)) {
      if (c < '0' || c > '9') return std::nullopt;
      if (digits < scale) {
        frac = frac * 10 + (c - '0');
        ++digits;
      }
    }
    if (int_part.empty() && s.size() == 1) return std::nullopt;
  }
  for (; digits < scale; ++digits) frac *= 10;
  std::int64_t pow = 1;
  for (int i = 0; i < scale; ++i) pow *= 10;
  const std::int64_t value = whole * pow + frac;
  return negative ? -value : value;
}

}  // namespace mimpact::detail
