#include "annotagg/csv.hpp"

#include <algorithm>

#include "annotagg/error.hpp"

namespace annotagg::csv {

std::optional<Row> Reader::next() {
  while (true) {
    if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;
    Row row;
    row.line = ++line_;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    bool any = false;
    char c;
    while (in_.get(c)) {
      any = true;
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get(c);
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"' && field.empty() && !field_was_quoted) {
        quoted = true;
        field_was_quoted = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (c == '\n') {
        break;
      } else if (c == '\r' && in_.peek() == '\n') {
        // CRLF: newline follows
      } else {
        field.push_back(c);
      }
    }
    if (quoted)
      throw DataError("CSV line " + std::to_string(row.line) + ": unterminated quoted field");
    if (!any) return std::nullopt;
    if (row.fields.empty() && field.empty() && !field_was_quoted) continue;  // blank line
    row.fields.push_back(std::move(field));
    return row;
  }
}

Table::Table(std::istream& in) : reader_(in) {
  auto h = reader_.next();
  if (h) {
    header_ = std::move(h->fields);
    for (auto& name : header_) {
      // tolerate a UTF-8 BOM and stray whitespace in column names
      if (name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
      while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
      while (!name.empty() && (name.front() == ' ' || name.front() == '\t')) name.erase(0, 1);
    }
  }
}

bool Table::has_column(std::string_view name) const {
  return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::size_t Table::column(std::string_view name) const {
  auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end()) throw DataError("CSV header lacks column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header_.begin());
}

std::optional<Row> Table::next() {
  auto row = reader_.next();
  if (row && row->fields.size() != header_.size())
    throw DataError("CSV line " + std::to_string(row->line) + ": expected " +
                    std::to_string(header_.size()) + " fields, got " +
                    std::to_string(row->fields.size()));
  return row;
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace annotagg::csv
