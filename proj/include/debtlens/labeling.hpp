#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "debtlens/common.hpp"
#include "debtlens/ingest.hpp"

namespace debtlens {

/// Which rule matched a label.
enum class LabelRule { TechnicalDebt, DebtType };

struct LabelMatch {
  std::string label;
  LabelRule rule;
  friend bool operator==(const LabelMatch&, const LabelMatch&) = default;
};

struct LabelVerdict {
  bool is_td = false;
  CategorySet categories;
  bool is_ground_truth = false;  // is_td && !categories.empty()
  std::vector<LabelMatch> matched_label_texts;

  friend bool operator==(const LabelVerdict&, const LabelVerdict&) = default;
};

/// The two case-insensitive label rules: one pattern flagging technical debt
/// and one pattern naming the debt type. Immutable and safe to share across
/// threads once constructed.
class LabelRuleSet {
 public:
  struct Alternation {
    Category category;
    std::string pattern;  // fragment of the type pattern, e.g. "doc(umentation)?"
  };

  static constexpr std::string_view kVersion = "td-label-rules/1";

  /// The published rule set.
  static const LabelRuleSet& standard();

  /// `td_pattern` and `type_pattern` may carry a leading "(?i)" flag; matching
  /// is always case-insensitive. Every alternation must name a distinct
  /// category and together they must cover the type pattern's group.
  LabelRuleSet(std::string version, std::string td_pattern, std::string type_pattern,
               std::vector<Alternation> alternations);

  const std::string& version() const { return version_; }
  const std::string& td_pattern() const { return td_pattern_; }
  const std::string& type_pattern() const { return type_pattern_; }
  const std::vector<Alternation>& alternations() const { return alternations_; }

  bool matches_td(std::string_view label) const;
  CategorySet match_types(std::string_view label) const;

  /// Versioned JSON document: {version, td_pattern, type_pattern, categories:[...]}
  std::string to_json() const;
  static LabelRuleSet from_json(std::string_view text);

 private:
  std::string version_;
  std::string td_pattern_;
  std::string type_pattern_;
  std::vector<Alternation> alternations_;
  std::regex td_regex_;
  std::regex type_regex_;
  std::vector<std::pair<Category, std::regex>> alternation_regexes_;
};

struct TdMatch {
  bool is_td = false;
  std::vector<std::string> matched;
};

TdMatch match_td_labels(const std::vector<std::string>& labels,
                        const LabelRuleSet& rules = LabelRuleSet::standard());

CategorySet match_type_labels(const std::vector<std::string>& labels,
                              const LabelRuleSet& rules = LabelRuleSet::standard());

LabelVerdict classify_labels(const IssueRecord& record,
                             const LabelRuleSet& rules = LabelRuleSet::standard());

struct ClassifiedRecord {
  IssueRecord record;
  LabelVerdict verdict;
};

/// Ground-truth records (TD label and type label both present) land only in
/// `ground_truth`. Records matching exactly one rule land in `td_positives` or
/// in every matching `category_positives` slot; the rest form `residual`.
struct VerdictPartition {
  std::vector<ClassifiedRecord> td_positives;
  std::array<std::vector<ClassifiedRecord>, kCategoryCount> category_positives;
  std::vector<ClassifiedRecord> ground_truth;
  std::vector<ClassifiedRecord> residual;
};

VerdictPartition partition_by_verdict(const std::vector<IssueRecord>& records,
                                      const LabelRuleSet& rules = LabelRuleSet::standard());

}  // namespace debtlens
