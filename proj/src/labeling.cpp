#include "debtlens/labeling.hpp"

#include <nlohmann/json.hpp>

namespace debtlens {

namespace {

constexpr std::string_view kTdPattern =
    R"((?i)\b(T(echnical[-_\s]?|ech[-_\s]?)?D(ebt|D)|\b(TD|td)\b|debt)\b)";
constexpr std::string_view kTypePattern =
    R"((?i)\b(architect(ure|ural)?|build|code|defect|design|doc(umentation)?|infrastructure|people|process|requirement|service|test(ing)?|automation)\b)";

// std::regex has no inline flags; case-insensitivity is set on construction.
std::string strip_inline_flag(std::string_view pattern) {
  if (pattern.starts_with("(?i)")) pattern.remove_prefix(4);
  return std::string(pattern);
}

std::regex compile(std::string_view pattern, std::string_view what) {
  try {
    return std::regex(strip_inline_flag(pattern),
                      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw ArgumentError("invalid " + std::string(what) + " pattern '" + std::string(pattern) +
                        "': " + e.what());
  }
}

}  // namespace

const LabelRuleSet& LabelRuleSet::standard() {
  static const LabelRuleSet rules(std::string(kVersion), std::string(kTdPattern),
                                  std::string(kTypePattern),
                                  {
                                      {Category::Architecture, "architect(ure|ural)?"},
                                      {Category::Build, "build"},
                                      {Category::Code, "code"},
                                      {Category::Defect, "defect"},
                                      {Category::Design, "design"},
                                      {Category::Documentation, "doc(umentation)?"},
                                      {Category::Infrastructure, "infrastructure"},
                                      {Category::People, "people"},
                                      {Category::Process, "process"},
                                      {Category::Requirement, "requirement"},
                                      {Category::Service, "service"},
                                      {Category::Test, "test(ing)?"},
                                      {Category::Automation, "automation"},
                                  });
  return rules;
}

LabelRuleSet::LabelRuleSet(std::string version, std::string td_pattern, std::string type_pattern,
                           std::vector<Alternation> alternations)
    : version_(std::move(version)),
      td_pattern_(std::move(td_pattern)),
      type_pattern_(std::move(type_pattern)),
      alternations_(std::move(alternations)),
      td_regex_(compile(td_pattern_, "TD")),
      type_regex_(compile(type_pattern_, "type")) {
  CategorySet seen;
  for (const auto& alt : alternations_) {
    if (seen.contains(alt.category))
      throw ArgumentError("duplicate alternation for category " +
                          std::string(category_name(alt.category)));
    seen.insert(alt.category);
    alternation_regexes_.emplace_back(alt.category, compile(alt.pattern, "alternation"));
  }
}

bool LabelRuleSet::matches_td(std::string_view label) const {
  return std::regex_search(label.begin(), label.end(), td_regex_);
}

CategorySet LabelRuleSet::match_types(std::string_view label) const {
  CategorySet out;
  using It = std::string_view::const_iterator;
  for (std::regex_iterator<It> it(label.begin(), label.end(), type_regex_), end; it != end; ++it) {
    const auto& m = (*it)[0];
    for (const auto& [category, re] : alternation_regexes_) {
      if (std::regex_match(m.first, m.second, re)) {
        out.insert(category);
        break;
      }
    }
  }
  return out;
}

std::string LabelRuleSet::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version_;
  j["td_pattern"] = td_pattern_;
  j["type_pattern"] = type_pattern_;
  auto cats = nlohmann::ordered_json::array();
  for (const auto& alt : alternations_)
    cats.push_back({{"category", category_name(alt.category)}, {"alternation", alt.pattern}});
  j["categories"] = std::move(cats);
  return j.dump(2) + "\n";
}

LabelRuleSet LabelRuleSet::from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("rule set: not a JSON object");
  try {
    std::vector<Alternation> alts;
    for (const auto& c : j.at("categories")) {
      auto name = c.at("category").get<std::string>();
      auto cat = category_from_name(name);
      if (!cat) throw FormatError("rule set: unknown category '" + name + "'");
      alts.push_back({*cat, c.at("alternation").get<std::string>()});
    }
    return LabelRuleSet(j.at("version").get<std::string>(), j.at("td_pattern").get<std::string>(),
                        j.at("type_pattern").get<std::string>(), std::move(alts));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("rule set: ") + e.what());
  }
}

TdMatch match_td_labels(const std::vector<std::string>& labels, const LabelRuleSet& rules) {
  TdMatch out;
  for (const auto& l : labels) {
    if (rules.matches_td(l)) {
      out.is_td = true;
      out.matched.push_back(l);
    }
  }
  return out;
}

CategorySet match_type_labels(const std::vector<std::string>& labels, const LabelRuleSet& rules) {
  CategorySet out;
  for (const auto& l : labels) out.merge(rules.match_types(l));
  return out;
}

LabelVerdict classify_labels(const IssueRecord& record, const LabelRuleSet& rules) {
  LabelVerdict v;
  for (const auto& l : record.labels) {
    if (rules.matches_td(l)) {
      v.is_td = true;
      v.matched_label_texts.push_back({l, LabelRule::TechnicalDebt});
    }
    auto types = rules.match_types(l);
    if (!types.empty()) {
      v.categories.merge(types);
      v.matched_label_texts.push_back({l, LabelRule::DebtType});
    }
  }
  v.is_ground_truth = v.is_td && !v.categories.empty();
  return v;
}

VerdictPartition partition_by_verdict(const std::vector<IssueRecord>& records,
                                      const LabelRuleSet& rules) {
  VerdictPartition p;
  for (const auto& r : records) {
    ClassifiedRecord cr{r, classify_labels(r, rules)};
    const auto& v = cr.verdict;
    if (v.is_ground_truth) {
      p.ground_truth.push_back(std::move(cr));
    } else if (v.is_td) {
      p.td_positives.push_back(std::move(cr));
    } else if (!v.categories.empty()) {
      for (auto c : v.categories.to_vector()) p.category_positives[index_of(c)].push_back(cr);
    } else {
      p.residual.push_back(std::move(cr));
    }
  }
  return p;
}

}  // namespace debtlens
