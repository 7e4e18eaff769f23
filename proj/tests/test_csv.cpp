#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "concord/csv.hpp"
#include "concord/errors.hpp"
#include "temp_dir.hpp"

using namespace concord;

namespace {
csv::Table parse_text(const std::string& text) {
  std::istringstream in(text);
  return csv::parse(in);
}
}  // namespace

TEST_CASE("csv: parse handles headers, quotes and line endings") {
  SUBCASE("plain table") {
    const auto table = parse_text("a,b,c\n1,2,3\n4,5,6\n");
    REQUIRE(table.header.size() == 3);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[1][2] == "6");
    CHECK(table.column("b") == 1);
    CHECK(table.column("missing") == -1);
  }
  SUBCASE("quoted fields with embedded separators") {
    const auto table = parse_text("x,y\n\"a,b\",\"he said \"\"hi\"\"\"\n");
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0][0] == "a,b");
    CHECK(table.rows[0][1] == "he said \"hi\"");
  }
  SUBCASE("CRLF and missing trailing newline") {
    const auto table = parse_text("a,b\r\n1,2\r\n3,4");
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[1][0] == "3");
    CHECK(table.rows[1][1] == "4");
  }
}

TEST_CASE("csv: format_double round-trips exactly") {
  const double values[] = {0.1,
                           1.0 / 3.0,
                           -2.5e-300,
                           1.7976931348623157e308,
                           123456789.123456789,
                           -0.0,
                           42.0};
  for (const double x : values) {
    const std::string text = csv::format_double(x);
    CHECK(std::strtod(text.c_str(), nullptr) == x);
  }
  // Prefers the short form when it is exact.
  CHECK(csv::format_double(42.0) == "42");
  CHECK(csv::format_double(0.5) == "0.5");
}

TEST_CASE("csv: parse_double accepts numbers and rejects junk") {
  double out = 0.0;
  CHECK(csv::parse_double("3.25", out));
  CHECK(out == 3.25);
  CHECK(csv::parse_double(" -1e-3 ", out));
  CHECK(out == -1e-3);
  CHECK_FALSE(csv::parse_double("", out));
  CHECK_FALSE(csv::parse_double("abc", out));
  CHECK_FALSE(csv::parse_double("1.5x", out));
  CHECK_FALSE(csv::parse_double("nan", out));
  CHECK_FALSE(csv::parse_double("inf", out));
}

TEST_CASE("csv: write_file_atomic creates directories and replaces content") {
  testutil::TempDir dir;
  const auto path = dir / "nested/deeper/out.txt";
  csv::write_file_atomic(path, "first");
  csv::write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string content;
  std::getline(in, content);
  CHECK(content == "second");
  // No temp files left behind.
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e :
       std::filesystem::directory_iterator(path.parent_path())) {
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("csv: read_file reports missing files") {
  CHECK_THROWS_AS(csv::read_file("/nonexistent/definitely/not/here.csv"), DataError);
}
