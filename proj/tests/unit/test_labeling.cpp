#include <doctest/doctest.h>

#include "debtlens/labeling.hpp"
#include "helpers.hpp"

using namespace debtlens;

namespace {

IssueRecord with_labels(std::vector<std::string> labels) {
  IssueRecord r;
  r.repo_name = "o/r";
  r.issue_id = 1;
  r.labels = std::move(labels);
  return r;
}

}  // namespace

TEST_CASE("label verdicts match the frozen reference fixture") {
  const auto cases = testing::read_json(testing::fixture("labels.json"));
  REQUIRE(cases.size() == 40);
  for (const auto& c : cases) {
    const auto labels = c["labels"].get<std::vector<std::string>>();
    const auto v = classify_labels(with_labels(labels));
    std::vector<std::string> cats;
    for (auto cat : v.categories.to_vector()) cats.emplace_back(category_name(cat));
    INFO(c["labels"].dump());
    CHECK(v.is_td == c["is_td"].get<bool>());
    CHECK(cats == c["categories"].get<std::vector<std::string>>());
    CHECK(v.is_ground_truth == c["is_ground_truth"].get<bool>());
    CHECK(match_td_labels(labels).matched == c["td_matched"].get<std::vector<std::string>>());
  }
}

TEST_CASE("matched label texts record which rule fired") {
  const auto v = classify_labels(with_labels({"tech-debt", "bug", "documentation"}));
  REQUIRE(v.matched_label_texts.size() == 2);
  CHECK(v.matched_label_texts[0] == LabelMatch{"tech-debt", LabelRule::TechnicalDebt});
  CHECK(v.matched_label_texts[1] == LabelMatch{"documentation", LabelRule::DebtType});
}

TEST_CASE("a single label can name several categories") {
  CHECK(LabelRuleSet::standard().match_types("code/test").size() == 2);
}

TEST_CASE("rule set JSON round-trips") {
  const auto& std_rules = LabelRuleSet::standard();
  const auto copy = LabelRuleSet::from_json(std_rules.to_json());
  CHECK(copy.version() == std_rules.version());
  CHECK(copy.td_pattern() == std_rules.td_pattern());
  CHECK(copy.type_pattern() == std_rules.type_pattern());
  CHECK(copy.alternations().size() == kCategoryCount);
  CHECK_THROWS_AS(LabelRuleSet::from_json("[]"), FormatError);
  CHECK_THROWS_AS(LabelRuleSet::from_json(R"({"version":"x"})"), FormatError);
}

TEST_CASE("partition_by_verdict routes records") {
  std::vector<IssueRecord> rs = {with_labels({"td"}), with_labels({"td", "test"}),
                                 with_labels({"design", "code"}), with_labels({"bug"})};
  const auto p = partition_by_verdict(rs);
  CHECK(p.td_positives.size() == 1);
  CHECK(p.ground_truth.size() == 1);
  CHECK(p.residual.size() == 1);
  CHECK(p.category_positives[index_of(Category::Design)].size() == 1);
  CHECK(p.category_positives[index_of(Category::Code)].size() == 1);
  CHECK(p.category_positives[index_of(Category::Test)].empty());
}
