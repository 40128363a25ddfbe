#pragma once

// Small helpers for the line-oriented model files. Doubles are written as
// hexfloats so save/load round-trips bit-exactly.

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>

#include "guidedgen/error.hpp"

namespace guidedgen::textio {

inline std::string hex(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

inline double parse_hex(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  bool neg = false;
  if (first != last && *first == '-') {
    neg = true;
    ++first;
  }
  auto res = std::from_chars(first, last, v, std::chars_format::hex);
  if (res.ec != std::errc{} || res.ptr != last) throw DataError("bad hexfloat '" + s + "'");
  return neg ? -v : v;
}

inline double read_hex(std::istream& in) {
  std::string s;
  if (!(in >> s)) throw DataError("unexpected end of file");
  return parse_hex(s);
}

inline void expect_tag(std::istream& in, const std::string& tag) {
  std::string got;
  if (!(in >> got) || got != tag) throw DataError("expected '" + tag + "', got '" + got + "'");
}

inline std::uint64_t expect_u64(std::istream& in, const std::string& tag) {
  expect_tag(in, tag);
  std::uint64_t v = 0;
  if (!(in >> v)) throw DataError("bad value for '" + tag + "'");
  return v;
}

inline std::size_t expect_count(std::istream& in, const std::string& tag) {
  return static_cast<std::size_t>(expect_u64(in, tag));
}

inline void expect_header(std::istream& in, const std::string& magic, int version) {
  if (expect_u64(in, magic) != static_cast<std::uint64_t>(version)) {
    throw DataError("unsupported " + magic + " version");
  }
}

}  // namespace guidedgen::textio
