#include <doctest/doctest.h>

#include <algorithm>
#include <set>

#include "debtlens/common.hpp"

using namespace debtlens;

TEST_CASE("parse_utc accepts the documented forms") {
  const auto ref = parse_utc("2015-01-01T00:00:00Z");
  REQUIRE(ref);
  CHECK(format_utc(*ref) == "2015-01-01T00:00:00Z");
  CHECK(parse_utc("2015-01-01") == ref);
  CHECK(parse_utc("2015-01-01 00:00:00") == ref);
  CHECK(parse_utc("2015-01-01T02:00:00+02:00") == ref);
  CHECK(parse_utc("2014-12-31T19:00:00-05:00") == ref);
  CHECK(parse_utc("2015-01-01T00:00:00.999Z") == ref);
  CHECK(format_utc(*parse_utc("2024-02-29T23:59:59Z")) == "2024-02-29T23:59:59Z");
}

TEST_CASE("parse_utc rejects malformed dates") {
  for (const char* bad : {"", "2015", "2015-13-01", "2015-02-30", "2015-01-01T25:00:00Z", "yesterday",
                          "2015-01-01T00:00:00Zjunk"})
    CHECK_MESSAGE(!parse_utc(bad), bad);
  CHECK_THROWS_AS(parse_utc_or_throw("nope"), ArgumentError);
}

TEST_CASE("category names round-trip") {
  for (auto c : kAllCategories) CHECK(category_from_name(category_name(c)) == c);
  CHECK(category_from_name("documentation") == Category::Documentation);
  CHECK_FALSE(category_from_name("Docs"));
}

TEST_CASE("CategorySet") {
  CategorySet s{Category::Test, Category::Build};
  CHECK(s.size() == 2);
  CHECK(s.contains(Category::Build));
  s.erase(Category::Build);
  CHECK(s.to_vector() == std::vector<Category>{Category::Test});
  s.merge({Category::Architecture});
  CHECK(s.to_vector().front() == Category::Architecture);
}

TEST_CASE("seeded randomness is reproducible and independent per step") {
  CHECK(derive_seed(42, "split/td") == derive_seed(42, "split/td"));
  CHECK(derive_seed(42, "split/td") != derive_seed(42, "split/Code"));
  CHECK(derive_seed(42, "split/td") != derive_seed(43, "split/td"));

  Rng a(7), b(7);
  std::vector<int> xs(50), ys(50);
  for (int i = 0; i < 50; ++i) xs[i] = ys[i] = i;
  a.shuffle(xs);
  b.shuffle(ys);
  CHECK(xs == ys);
  std::sort(xs.begin(), xs.end());
  for (int i = 0; i < 50; ++i) CHECK(xs[i] == i);

  Rng r(1);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(3) < 3);
  auto idx = r.sample_indices(100, 30);
  CHECK(idx.size() == 30);
  CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 30);
  CHECK(*std::max_element(idx.begin(), idx.end()) < 100);
  CHECK(r.sample_indices(5, 5).size() == 5);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
