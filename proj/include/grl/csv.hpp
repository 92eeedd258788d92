#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace grl {

using Cell = std::variant<std::string, std::int64_t, double>;
using CsvRow = std::vector<Cell>;

// shortest text that parses back to the same double
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw IoError("number formatting failed");
  return std::string(buf, end);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_cell(const Cell& c) {
  if (auto* s = std::get_if<std::string>(&c)) return csv_field(*s);
  if (auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return format_double(std::get<double>(c));
}

inline void write_csv(std::ostream& os, const std::vector<CsvRow>& rows, const std::vector<std::string>& schema) {
  for (std::size_t j = 0; j < schema.size(); ++j) os << (j ? "," : "") << csv_field(schema[j]);
  os << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != schema.size())
      throw ShapeMismatch("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) + " cells, schema has " +
                          std::to_string(schema.size()));
    for (std::size_t j = 0; j < rows[i].size(); ++j) os << (j ? "," : "") << csv_cell(rows[i][j]);
    os << '\n';
  }
}

inline void emit_csv(const std::vector<CsvRow>& rows, const std::vector<std::string>& schema, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_csv(f, rows, schema);
  f.flush();
  if (!f) throw IoError("write to " + path + " failed");
}

// RFC-4180 reader, enough for round trips of what write_csv produces
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      out.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace grl
