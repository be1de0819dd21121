#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "msched/errors.hpp"

namespace msched {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_hex64(std::uint64_t v) {
  char buf[17];
  auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, res.ptr);
}

/// Whitespace-tokenized line input that reports failures as ParseError with 1-based
/// line and column.
class LineReader {
 public:
  LineReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  std::vector<std::string_view> next(std::string_view expect_key, std::size_t fields) {
    if (!std::getline(is_, line_)) fail(1, "unexpected end of file, expected '" + std::string(expect_key) + "'");
    ++lineno_;
    auto toks = split();
    if (toks.empty() || toks[0] != expect_key) fail(1, "expected '" + std::string(expect_key) + "'");
    if (fields && toks.size() != fields + 1) {
      fail(1, "'" + std::string(expect_key) + "' takes " + std::to_string(fields) + " fields");
    }
    return toks;
  }

  /// Next line that is neither blank nor a '#' comment; false at end of input.
  bool next_record(std::vector<std::string_view>& toks) {
    while (std::getline(is_, line_)) {
      ++lineno_;
      toks = split();
      if (!toks.empty() && toks[0][0] != '#') return true;
    }
    return false;
  }

  std::size_t line_number() const noexcept { return lineno_; }

  std::vector<std::string_view> raw() {
    if (!std::getline(is_, line_)) fail(1, "unexpected end of file");
    ++lineno_;
    return split();
  }

  template <class T>
  T number(std::string_view tok, int base = 10) {
    T v{};
    std::from_chars_result r;
    if constexpr (std::is_floating_point_v<T>) {
      r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    } else {
      r = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
    }
    if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) fail(column(tok), "bad number '" + std::string(tok) + "'");
    return v;
  }

  [[noreturn]] void fail(std::size_t col, const std::string& what) const { throw ParseError(source_, lineno_, col, what); }

  std::size_t column(std::string_view tok) const { return static_cast<std::size_t>(tok.data() - line_.data()) + 1; }

 private:
  std::vector<std::string_view> split() const {
    std::vector<std::string_view> out;
    std::string_view s(line_);
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
      const auto b = i;
      while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
      if (i > b) out.push_back(s.substr(b, i - b));
    }
    return out;
  }

  std::istream& is_;
  std::string source_;
  std::string line_;
  std::size_t lineno_ = 0;
};

}  // namespace msched
