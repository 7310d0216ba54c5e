#include "urelay/table.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace urelay::table {

Table::Table(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("table needs columns");
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw std::invalid_argument("table row arity mismatch");
  }
  rows_.push_back(std::move(row));
}

int Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::string Table::format_cell(const Cell& c) {
  if (const std::string* s = std::get_if<std::string>(&c)) return *s;
  char buf[48];
  if (const double* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    const auto res = std::to_chars(buf, buf + sizeof(buf), *d);
    return std::string(buf, res.ptr);
  }
  const std::int64_t v = std::get<std::int64_t>(c);
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string Table::csv_field(const std::string& raw) {
  const bool needs_quote =
      raw.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quote) return raw;
  std::string out = "\"";
  for (char ch : raw) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += csv_field(columns_[i].name);
  }
  out += "\r\n";
  for (const std::vector<Cell>& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_field(format_cell(r[i]));
    }
    out += "\r\n";
  }
  return out;
}

}  // namespace urelay::table
