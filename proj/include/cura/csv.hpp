#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cura::csv {

/// RFC 4180 style reader: comma separated, `"` quoting with `""` escapes,
/// quoted fields may span lines.
class Reader {
 public:
  explicit Reader(std::istream& in, char delimiter = ',') : in_(in), delim_(delimiter) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  /// Throws ParseError on an unterminated quoted field.
  bool next(std::vector<std::string>& fields);

  /// Line number (1-based) on which the most recently returned record started.
  std::size_t line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  char delim_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

std::string escape(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace cura::csv
