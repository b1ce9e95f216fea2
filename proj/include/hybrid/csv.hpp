#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <vector>

#include "hybrid/common.hpp"

namespace hybrid::csv {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("cannot parse number '" + s + "' in " + what);
  return v;
}

inline long parse_long(const std::string& s, const std::string& what) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("cannot parse integer '" + s + "' in " + what);
  return v;
}

// Shortest round-trip decimal form: numeric fields survive emit -> ingest
// bit-exactly.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[32];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return std::string(shorter);
    }
  }
  return std::string(buf);
}

}  // namespace hybrid::csv
