#include <atomic>
#include <limits>

#include "doctest.h"
#include "vgp/text.hpp"

using namespace vgp;

TEST_CASE("whitespace splitting and joining") {
  CHECK(split_whitespace("  a\tb  c\n") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_whitespace("").empty());
  CHECK(join({"x", "y", "z"}, "-") == "x-y-z");
  CHECK(to_lower("AbC") == "abc");
  CHECK(trim("  q ") == "q");
  const auto parts = split("a\t\tb", '\t');
  REQUIRE(parts.size() == 3);
  CHECK(parts[1].empty());
}

TEST_CASE("strict number parsing") {
  double d = 0;
  long l = 0;
  CHECK(parse_double("1.5e2", d));
  CHECK(d == 150.0);
  CHECK_FALSE(parse_double("1.5x", d));
  CHECK_FALSE(parse_double("", d));
  CHECK(parse_long("-42", l));
  CHECK(l == -42);
  CHECK_FALSE(parse_long("4.2", l));
}

TEST_CASE("shortest round-trip formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.0, 0.0}) {
    double back = 0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("parallel_for visits each index once for any job count") {
  for (int jobs : {1, 2, 7}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parse errors carry the line number") {
  ParseError e(12, "bad field");
  CHECK(e.line() == 12);
  CHECK(std::string(e.what()) == "line 12: bad field");
}
