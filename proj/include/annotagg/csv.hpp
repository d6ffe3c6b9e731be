#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace annotagg::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

/// RFC 4180 reader: quoted fields may contain commas, quotes ("") and newlines.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next record, or nullopt at end of input. Blank lines are skipped.
  std::optional<Row> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

/// Reads a header row and resolves named columns.
class Table {
 public:
  explicit Table(std::istream& in);

  bool has_column(std::string_view name) const;
  std::size_t column(std::string_view name) const;  // throws DataError if absent
  const std::vector<std::string>& header() const { return header_; }

  std::optional<Row> next();

 private:
  Reader reader_;
  std::vector<std::string> header_;
};

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace annotagg::csv
