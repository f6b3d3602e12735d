#include "literal.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "rp2ends/error.hpp"

namespace rp2ends::cli {

namespace {

[[noreturn]] void bad(std::string_view token, std::string_view why) {
  throw Error(ErrorCode::ParseError, "bad token '" + std::string(token) + "': " + std::string(why));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Unsigned decimal with optional fraction and exponent; returns its length.
std::size_t scan_number(std::string_view s) {
  std::size_t i = 0;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  }
  if (digits == 0) return 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    const std::size_t k = j;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j > k) i = j;
  }
  return i;
}

double to_double(std::string_view digits, std::string_view token) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || p != digits.data() + digits.size() || !std::isfinite(v)) {
    bad(token, "number out of range");
  }
  return v;
}

}  // namespace

cplx parse_complex(std::string_view token) {
  const std::string_view s = trim(token);
  if (s.empty()) bad(token, "empty");
  double re = 0.0;
  double im = 0.0;
  bool have_re = false;
  bool have_im = false;
  std::size_t i = 0;
  while (i < s.size()) {
    double sign = 1.0;
    const bool leading = i == 0;
    if (s[i] == '+' || s[i] == '-') {
      if (s[i] == '-') sign = -1.0;
      ++i;
    } else if (!leading) {
      bad(token, "expected a sign between parts");
    }
    const std::size_t n = scan_number(s.substr(i));
    double mag = 1.0;
    if (n > 0) mag = to_double(s.substr(i, n), token);
    i += n;
    const bool imaginary = i < s.size() && s[i] == 'i';
    if (imaginary) ++i;
    if (n == 0 && !imaginary) bad(token, "expected a number or 'i'");
    if (imaginary) {
      if (have_im) bad(token, "two imaginary parts");
      im = sign * mag;
      have_im = true;
    } else {
      if (have_re || have_im) bad(token, "real part must come first, once");
      re = sign * mag;
      have_re = true;
    }
  }
  return {re, im};
}

double parse_real(std::string_view token) {
  const std::string_view s = trim(token);
  std::size_t i = 0;
  if (!s.empty() && (s[0] == '+' || s[0] == '-')) i = 1;
  const std::size_t n = scan_number(s.substr(i));
  if (n == 0 || i + n != s.size()) bad(token, "expected a real number");
  const double v = to_double(s.substr(i, n), token);
  return s[0] == '-' ? -v : v;
}

long parse_integer(std::string_view token) {
  const std::string_view s = trim(token);
  long v = 0;
  const char* b = s.data();
  if (!s.empty() && s[0] == '+') ++b;
  const auto [p, ec] = std::from_chars(b, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) bad(token, "expected an integer");
  return v;
}

bool parse_bool(std::string_view token) {
  const std::string_view s = trim(token);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  bad(token, "expected true or false");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    const std::string_view item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    if (item.empty()) bad(text, "empty list item");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_complex(cplx z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

}  // namespace rp2ends::cli
