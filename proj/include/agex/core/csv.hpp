#pragma once

#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "agex/core/error.hpp"

namespace agex::csv {

// Minimal CSV: fields never contain separators, quotes or newlines. Every
// writer in this project emits that subset; readers reject anything else.
inline std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (const auto& f : out) {
    if (f.find('"') != std::string::npos) throw ValidationError("quoted CSV fields are not supported");
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError("missing CSV column '" + std::string(name) + "'");
  }
};

inline Table parse(std::string_view text) {
  Table t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) {
        throw ValidationError("CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw ValidationError("empty CSV");
  return t;
}

inline void check_field(std::string_view f) {
  if (f.find_first_of(",\"\n\r") != std::string_view::npos) {
    throw ValidationError("CSV field contains a reserved character: " + std::string(f));
  }
}

template <typename... Ts>
void write_row(std::ostringstream& os, const Ts&... fields) {
  bool first = true;
  auto one = [&](const auto& f) {
    if (!first) os << ',';
    first = false;
    std::ostringstream tmp;
    tmp.precision(os.precision());
    tmp << f;
    check_field(tmp.str());
    os << tmp.str();
  };
  (one(fields), ...);
  os << '\n';
}

inline double to_double(const std::string& s) {
  std::size_t idx = 0;
  double v = 0;
  try {
    v = std::stod(s, &idx);
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + s + "'");
  }
  if (idx != s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

inline long long to_int(const std::string& s) {
  std::size_t idx = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &idx);
  } catch (const std::exception&) {
    throw ValidationError("not an integer: '" + s + "'");
  }
  if (idx != s.size()) throw ValidationError("not an integer: '" + s + "'");
  return v;
}

}  // namespace agex::csv
