#include "urelay/table.hpp"

#include <cstdint>
#include <sstream>
#include <stdexcept>

#include "doctest.h"

using namespace urelay::table;

TEST_CASE("csv shape and crlf endings") {
  Table t({{"m", ColumnKind::numeric}, {"objective", ColumnKind::probability}});
  for (int i = 0; i < 4; ++i) {
    t.add_row({static_cast<std::int64_t>(100 + i), 1e-13 * (i + 1)});
  }
  const std::string csv = t.to_csv();
  std::size_t lines = 0, pos = 0;
  while ((pos = csv.find("\r\n", pos)) != std::string::npos) {
    ++lines;
    pos += 2;
  }
  CHECK(lines == 5);  // header + 4 rows, every line CRLF-terminated
  CHECK(csv.substr(0, 13) == "m,objective\r\n");
  CHECK(csv.find('\n') != std::string::npos);
  CHECK(csv.find("100,1e-13") != std::string::npos);
}

TEST_CASE("quoting only where needed") {
  Table t({{"name", ColumnKind::label}, {"v", ColumnKind::numeric}});
  t.add_row({std::string("plain"), 1.0});
  t.add_row({std::string("with,comma"), 2.0});
  t.add_row({std::string("with\"quote"), 3.0});
  const std::string csv = t.to_csv();
  CHECK(csv.find("plain,1") != std::string::npos);
  CHECK(csv.find("\"with,comma\",2") != std::string::npos);
  CHECK(csv.find("\"with\"\"quote\",3") != std::string::npos);

  CHECK(Table::csv_field("simple") == "simple");
  CHECK(Table::csv_field("a,b") == "\"a,b\"");
  CHECK(Table::csv_field("a\"b") == "\"a\"\"b\"");
  CHECK(Table::csv_field("a\nb") == "\"a\nb\"");
}

TEST_CASE("format_cell round trips doubles") {
  for (double v : {0.1, 1.0 / 3.0, 1e-13, 4.0695148989333556e-13, 6.02e23}) {
    const std::string s = Table::format_cell(Cell{v});
    double back = 0.0;
    std::istringstream(s) >> back;
    CHECK(back == v);
  }
  CHECK(Table::format_cell(Cell{std::int64_t{42}}) == "42");
  CHECK(Table::format_cell(Cell{std::string("x")}) == "x");
  CHECK(Table::format_cell(Cell{1.0}) == "1");
}

TEST_CASE("arity and lookup") {
  Table t({{"a", ColumnKind::numeric}, {"b", ColumnKind::numeric}});
  CHECK_THROWS_AS(t.add_row({1.0}), std::invalid_argument);
  t.add_row({1.0, 2.0});
  CHECK(t.row_count() == 1);
  CHECK(t.column_index("b") == 1);
  CHECK(t.column_index("zzz") == -1);
  CHECK(std::get<double>(t.at(0, 1)) == 2.0);
}
