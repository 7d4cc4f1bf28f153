#include <doctest/doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "debtlens/corpus.hpp"
#include "helpers.hpp"

using namespace debtlens;
using testing::example;

TEST_CASE("normalize_text") {
  CHECK(normalize_text("Hello   WORLD") == "hello world");
  CHECK(normalize_text("see https://x.org/a?b=1 and www.example.com/x now") == "see and now");
  CHECK(normalize_text("ftp://files.example.com/a.tgz done") == "done");
  CHECK(normalize_text("rocket 🚀🔥 launch") == "rocket launch");
  CHECK(normalize_text("keep .,;:?!'\"()- drop #@*_{}[]<>/\\|~`^$%&+=") == "keep .,;:?!'\"()- drop");
  CHECK(normalize_text("Café NAÏVE Ünïcödé") == "café naïve ünïcödé");
  CHECK(normalize_text("Привет МИР") == "привет мир");
  CHECK(normalize_text("tabs\tand\nnewlines\r\n") == "tabs and newlines");
  // Removing a character may splice a URL prefix together.
  CHECK(normalize_text("w#ww.example.com tail") == "tail");
  CHECK(normalize_text("") == "");
}

TEST_CASE("clean_text enforces the minimum length in code points") {
  CHECK_FALSE(clean_text("short", "").accepted());
  CHECK(clean_text("short", "").reason == RejectReason::TooShort);
  const std::string thirty(30, 'a');
  CHECK(clean_text(thirty.substr(0, 14), thirty.substr(0, 15)).accepted());  // 14 + space + 15
  CHECK_FALSE(clean_text(thirty.substr(0, 14), thirty.substr(0, 14)).accepted());
  // 29 two-byte characters are still too short.
  std::string accents;
  for (int i = 0; i < 29; ++i) accents += "é";
  CHECK_FALSE(clean_text(accents, "").accepted());
  CHECK(clean_text(accents, "x").accepted());

  CleanOptions gated;
  gated.language_filter = [](std::string_view) { return false; };
  const auto r = clean_text("a long enough title for the gate", "body", gated);
  CHECK_FALSE(r.accepted());
  CHECK(r.reason == RejectReason::NonEnglish);
}

TEST_CASE("deduplicate keeps the first example of each text") {
  const auto out = deduplicate({example("a", "x", true), example("b", "y", true), example("c", "x", true)});
  REQUIRE(out.size() == 2);
  CHECK(out[0].id == "a");
  CHECK(out[1].id == "b");
}

TEST_CASE("build_balanced_dataset") {
  std::vector<LabeledExample> pos, neg;
  for (int i = 0; i < 10; ++i) pos.push_back(example("p" + std::to_string(i), "p" + std::to_string(i), true));
  for (int i = 0; i < 25; ++i) neg.push_back(example("n" + std::to_string(i), "n" + std::to_string(i), true));
  const auto b = build_balanced_dataset(pos, neg, 3);
  CHECK(b.per_class == 10);
  CHECK(b.examples.size() == 20);
  CHECK_FALSE(b.warning);
  CHECK(std::count_if(b.examples.begin(), b.examples.end(),
                      [](const auto& e) { return std::get<bool>(e.label); }) == 10);
  CHECK(build_balanced_dataset(pos, neg, 3).examples.size() == b.examples.size());

  const auto down = build_balanced_dataset(neg, pos, 3);
  CHECK(down.per_class == 10);
  CHECK(down.warning);
  CHECK_THROWS_AS(build_balanced_dataset({}, neg, 1), CurationError);
  CHECK_THROWS_AS(build_balanced_dataset(pos, {}, 1), CurationError);
}

TEST_CASE("carve_ood withholds the largest repositories, ties by name") {
  std::vector<LabeledExample> xs = {example("1", "a", true, "b/b"), example("2", "b", true, "a/a"),
                                    example("3", "c", false, "c/c"), example("4", "d", true, "b/b"),
                                    example("5", "e", true, "a/a")};
  const auto s = carve_ood(xs, 1);
  CHECK(s.withheld_repos == std::vector<std::string>{"a/a"});
  CHECK(s.ood.size() == 2);
  CHECK(s.main.size() == 3);
  CHECK(carve_ood(xs, 2).withheld_repos == std::vector<std::string>{"a/a", "b/b"});
  CHECK(carve_ood(xs, 0).main.size() == 5);
  CHECK_THROWS_AS(carve_ood(xs, 3), CurationError);
}

TEST_CASE("split_train_test uses floor(ratio * n) per class") {
  std::vector<LabeledExample> xs;
  for (int i = 0; i < 100; ++i) xs.push_back(example(std::to_string(i), std::to_string(i), true));
  for (int i = 0; i < 7; ++i) xs.push_back(example("n" + std::to_string(i), "n" + std::to_string(i), false));
  const auto tt = split_train_test(xs, 0.85, 11);
  auto count = [](const auto& v, bool l) {
    return std::count_if(v.begin(), v.end(), [&](const auto& e) { return std::get<bool>(e.label) == l; });
  };
  CHECK(count(tt.train, true) == 85);
  CHECK(count(tt.test, true) == 15);
  CHECK(count(tt.train, false) == 5);
  CHECK(count(tt.test, false) == 2);
  CHECK_THROWS_AS(split_train_test(xs, 1.0, 1), ArgumentError);
  CHECK_THROWS_AS(split_train_test({example("x", "x", true)}, 0.5, 1), CurationError);
}

TEST_CASE("stratified_folds balance each class") {
  std::vector<LabeledExample> xs;
  for (int i = 0; i < 23; ++i) xs.push_back(example(std::to_string(i), "t", true));
  for (int i = 0; i < 12; ++i) xs.push_back(example("n" + std::to_string(i), "t", false));
  const auto folds = stratified_folds(xs, 5, 9);
  std::map<std::pair<bool, int>, int> sizes;
  for (std::size_t i = 0; i < xs.size(); ++i) ++sizes[{std::get<bool>(xs[i].label), folds[i]}];
  for (bool cls : {false, true}) {
    int lo = 1 << 30, hi = 0;
    for (int f = 0; f < 5; ++f) {
      lo = std::min(lo, sizes[{cls, f}]);
      hi = std::max(hi, sizes[{cls, f}]);
    }
    CHECK(hi - lo <= 1);
  }
  CHECK_THROWS_AS(stratified_folds(xs, 1, 0), ArgumentError);
  CHECK_THROWS_AS(stratified_folds(xs, 13, 0), CurationError);
}

TEST_CASE("temporal_split and purge_ground_truth") {
  std::vector<LabeledExample> xs = {example("a", "a", true, "o/r", "2023-12-31T23:59:59Z"),
                                    example("b", "b", true, "o/r", "2024-01-01T00:00:00Z")};
  const auto t = temporal_split(xs, parse_utc_or_throw("2024-01-01"));
  CHECK(t.train_pre.size() == 1);
  CHECK(t.test_post.size() == 1);

  const auto p = purge_ground_truth(xs, {"a"});
  CHECK(p.removed == 1);
  CHECK(p.examples.size() == 1);
  CHECK_FALSE(p.warning);
  CHECK(purge_ground_truth(xs, {"a", "b"}).warning);
}

TEST_CASE("build_multiclass_dataset relabels every category bucket") {
  std::array<std::vector<LabeledExample>, kCategoryCount> buckets;
  for (auto c : kAllCategories)
    buckets[index_of(c)] = {example(std::string(category_name(c)), "text", true)};
  buckets[0].push_back(example("extra", "text2", true));
  const auto out = build_multiclass_dataset(buckets, 5);
  CHECK(out.size() == kCategoryCount + 1);
  std::map<std::string, int> per;
  for (const auto& e : out) ++per[label_name(e.label)];
  CHECK(per["Architecture"] == 2);
  CHECK(per["Test"] == 1);
  buckets[3].clear();
  CHECK_THROWS_AS(build_multiclass_dataset(buckets, 5), CurationError);
}

TEST_CASE("make_bundle is deterministic under a seed") {
  std::vector<LabeledExample> xs;
  for (int i = 0; i < 60; ++i)
    xs.push_back(example(std::to_string(i), "t" + std::to_string(i), i % 2 == 0, "r/" + std::to_string(i % 7)));
  BundleOptions o;
  o.seed = 99;
  const auto a = make_bundle("x", xs, o), b = make_bundle("x", xs, o);
  auto ids = [](const std::vector<LabeledExample>& v) {
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(e.id);
    return out;
  };
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.test) == ids(b.test));
  CHECK(a.folds == b.folds);
  o.seed = 100;
  CHECK(ids(make_bundle("x", xs, o).train) != ids(a.train));
}
