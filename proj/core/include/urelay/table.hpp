#pragma once

// Small typed result table with deterministic CSV serialization (RFC 4180:
// CRLF row endings, quoting only where needed, shortest round-trip number
// formatting).

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace urelay::table {

enum class ColumnKind { label, numeric, probability };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

using Cell = std::variant<std::string, double, std::int64_t>;

class Table {
 public:
  explicit Table(std::vector<Column> columns);

  // Throws std::invalid_argument on arity mismatch.
  void add_row(std::vector<Cell> row);

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t row_count() const { return rows_.size(); }
  const std::vector<Cell>& row(std::size_t i) const { return rows_.at(i); }
  const Cell& at(std::size_t row, std::size_t col) const {
    return rows_.at(row).at(col);
  }
  // -1 when no column has that name.
  int column_index(const std::string& name) const;

  std::string to_csv() const;

  // Shortest round-trip representation of one cell.
  static std::string format_cell(const Cell& c);
  // RFC 4180 escaping of one raw field.
  static std::string csv_field(const std::string& raw);

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace urelay::table
