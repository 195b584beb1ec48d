#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace kofn {

/// Minimal RFC 4180 writer: comma separator, CRLF-free lines, quotes doubled.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);
  void row(std::initializer_list<std::string> fields) { row(std::vector<std::string>(fields)); }

  static std::string quote(std::string_view field);

 private:
  std::ostream& out_;
};

/// Shortest round-trip decimal representation (C locale, dot separator).
std::string format_number(double value);
/// Fixed-point representation with `digits` decimals.
std::string format_fixed(double value, int digits);

/// Parses a CSV document into rows of fields (handles quoted fields).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace kofn
