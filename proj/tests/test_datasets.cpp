#include "drmel/datasets.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <string>

using namespace drmel;

TEST_CASE("cyclosporine split") {
  const auto d = cyclosporine_split();
  CHECK(d.n0() == 28);
  CHECK(d.n1() == 28);
  CHECK(d.dx() == 1);
  CHECK(data_digest(d) == kCyclosporineDigest);
  const auto h = d.column(0, 0), r = d.column(0, 1);
  CHECK(*std::min_element(h.begin(), h.end()) > 0.0);
  CHECK(*std::min_element(r.begin(), r.end()) > 0.0);
  CHECK(*std::max_element(h.begin(), h.end()) > *std::min_element(h.begin(), h.end()));
}

TEST_CASE("CSV round trip keeps the digest") {
  const auto d = cyclosporine_split();
  const std::string path = "drmel_roundtrip_test.csv";
  write_csv(d, path, {"conc"});
  const auto e = load_csv(path);
  std::remove(path.c_str());
  CHECK(data_digest(e) == data_digest(d));
}

TEST_CASE("CSV errors name the row") {
  const std::string text = "group,x\n0,1\n1,2\n0,3\n1,4\n0,5\n1,abc\n";
  try {
    parse_csv(text);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }
  try {
    parse_csv("x,y\n1,2\n");
    FAIL("expected MissingGroupColumn");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingGroupColumn);
  }
  CHECK_THROWS_AS(parse_csv("group,x\n2,1\n"), Error);
  CHECK_THROWS_AS(parse_csv("group,x\n0,1,2\n"), Error);
}

TEST_CASE("group column may sit anywhere") {
  const auto d = parse_csv("x,group,z\n1.5,0,2\n2.5,1,3\n3.5,0,4\n");
  CHECK(d.n0() == 2);
  CHECK(d.n1() == 1);
  CHECK(d.dx() == 2);
  CHECK(d.x(1) == 2.5);
  CHECK(d.values()(2, 1) == 4.0);
}
