#include "debtlens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "debtlens/unicode.hpp"

namespace debtlens {

namespace {

using unicode::is_emoji;
using unicode::is_letter;
using unicode::is_number;
using unicode::is_space;

bool starts_with_at(const std::u32string& s, std::size_t i, std::u32string_view prefix) {
  return s.size() - i >= prefix.size() && std::u32string_view(s).substr(i, prefix.size()) == prefix;
}

// Removes (?:https?|ftp)://\S+ and www\.\S+ runs.
std::u32string strip_urls(const std::u32string& s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t prefix = 0;
    for (std::u32string_view p : {U"https://", U"http://", U"ftp://", U"www."}) {
      if (starts_with_at(s, i, p)) {
        prefix = p.size();
        break;
      }
    }
    if (prefix > 0 && i + prefix < s.size() && !is_space(s[i + prefix])) {
      i += prefix;
      while (i < s.size() && !is_space(s[i])) ++i;
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

bool allowed_char(char32_t c) {
  if (is_letter(c) || is_number(c) || is_space(c)) return true;
  switch (c) {
    case U'.': case U',': case U';': case U':': case U'?': case U'!':
    case U'\'': case U'"': case U'(': case U')': case U'-':
      return true;
    default:
      return false;
  }
}

std::u32string strip_disallowed(const std::u32string& s) {
  std::u32string out;
  out.reserve(s.size());
  for (char32_t c : s)
    if (!is_emoji(c) && allowed_char(c)) out.push_back(c);
  return out;
}

std::u32string collapse_whitespace(const std::u32string& s) {
  std::u32string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char32_t c : s) {
    if (is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(U' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::u32string s = unicode::decode(text);
  for (auto& c : s) c = unicode::to_lower(c);
  // Dropping characters can splice a new "www." together, so URL and
  // character removal repeat until nothing changes.
  for (;;) {
    auto next = strip_disallowed(strip_urls(s));
    if (next == s) break;
    s = std::move(next);
  }
  return unicode::encode(collapse_whitespace(s));
}

CleanResult clean_text(std::string_view title, std::string_view body,
                       const CleanOptions& options) {
  std::string joined;
  joined.reserve(title.size() + body.size() + 1);
  joined.append(title).append(" ").append(body);
  std::string cleaned = normalize_text(joined);

  CleanResult result;
  if (unicode::decode(cleaned).size() < options.min_length) {
    result.reason = RejectReason::TooShort;
    return result;
  }
  if (options.language_filter && !options.language_filter(cleaned)) {
    result.reason = RejectReason::NonEnglish;
    return result;
  }
  result.text = std::move(cleaned);
  return result;
}

std::size_t class_index(const ExampleLabel& label) {
  if (const bool* b = std::get_if<bool>(&label)) return *b ? 1 : 0;
  return index_of(std::get<Category>(label));
}

std::string label_name(const ExampleLabel& label) {
  if (const bool* b = std::get_if<bool>(&label)) return *b ? "true" : "false";
  return std::string(category_name(std::get<Category>(label)));
}

std::optional<LabeledExample> make_example(const ClassifiedRecord& record, ExampleLabel label,
                                           const CleanOptions& options) {
  auto cleaned = clean_text(record.record.title, record.record.body, options);
  if (!cleaned.accepted()) return std::nullopt;
  return LabeledExample{record.record.key(), std::move(*cleaned.text), label,
                        record.record.repo_name, record.record.created_at, record.verdict};
}

std::vector<LabeledExample> deduplicate(const std::vector<LabeledExample>& examples) {
  std::unordered_set<std::string_view> seen;
  std::vector<LabeledExample> out;
  for (const auto& e : examples)
    if (seen.insert(e.text).second) out.push_back(e);
  return out;
}

BalancedDataset build_balanced_dataset(const std::vector<LabeledExample>& positives,
                                       const std::vector<LabeledExample>& negative_pool,
                                       std::uint64_t seed) {
  if (positives.empty()) throw CurationError("balanced dataset: no positive examples");
  if (negative_pool.empty()) throw CurationError("balanced dataset: negative pool is empty");

  const std::size_t n = std::min(positives.size(), negative_pool.size());
  Rng rng(seed);
  BalancedDataset out;
  out.per_class = n;

  auto pick = [&](const std::vector<LabeledExample>& pool, bool label) {
    std::vector<std::size_t> idx;
    if (pool.size() == n) {
      idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
      idx = rng.sample_indices(pool.size(), n);
      std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) {
      out.examples.push_back(pool[i]);
      out.examples.back().label = label;
    }
  };
  pick(positives, true);
  pick(negative_pool, false);

  if (positives.size() > n)
    out.warning = "positives downsampled from " + std::to_string(positives.size()) + " to " +
                  std::to_string(n) + " (negative pool too small)";
  return out;
}

OodSplit carve_ood(const std::vector<LabeledExample>& examples, std::size_t top_n) {
  OodSplit out;
  if (top_n == 0) {
    out.main = examples;
    return out;
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) ++counts[e.repo_name];
  if (counts.size() < top_n + 1)
    throw CurationError("OOD carve-out: " + std::to_string(counts.size()) +
                        " distinct repositories cannot withhold " + std::to_string(top_n) +
                        " and keep any");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::set<std::string> withheld;
  for (std::size_t i = 0; i < top_n; ++i) {
    withheld.insert(ranked[i].first);
    out.withheld_repos.push_back(ranked[i].first);
  }
  for (const auto& e : examples)
    (withheld.count(e.repo_name) ? out.ood : out.main).push_back(e);
  return out;
}

Rebalanced rebalance_binary(const std::vector<LabeledExample>& examples, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < examples.size(); ++i)
    (class_index(examples[i].label) == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw CurationError("rebalance: binary dataset lacks one class (" + std::to_string(pos.size()) +
                        " positives, " + std::to_string(neg.size()) + " negatives)");
  Rebalanced out;
  if (pos.size() == neg.size()) {
    out.examples = examples;
    return out;
  }
  auto& major = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  Rng rng(seed);
  auto chosen = rng.sample_indices(major.size(), keep);
  std::vector<bool> keep_mask(examples.size(), true);
  for (auto i : major) keep_mask[i] = false;
  for (auto c : chosen) keep_mask[major[c]] = true;
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (keep_mask[i]) out.examples.push_back(examples[i]);
  out.dropped = examples.size() - out.examples.size();
  return out;
}

namespace {

std::map<std::size_t, std::vector<std::size_t>> group_by_class(
    const std::vector<LabeledExample>& examples) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < examples.size(); ++i)
    groups[class_index(examples[i].label)].push_back(i);
  return groups;
}

}  // namespace

TrainTest split_train_test(const std::vector<LabeledExample>& dataset, double ratio,
                           std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ArgumentError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
  TrainTest out;
  Rng rng(seed);
  for (auto& [cls, idx] : group_by_class(dataset)) {
    if (idx.size() < 2)
      throw CurationError("train/test split: class '" + label_name(dataset[idx.front()].label) +
                          "' has fewer than 2 examples");
    rng.shuffle(idx);
    // Tolerance absorbs binary representation error (0.85 * 100 -> 84.999...).
    auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size()) + 1e-9));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? out.train : out.test).push_back(dataset[idx[i]]);
  }
  return out;
}

std::vector<int> stratified_folds(const std::vector<LabeledExample>& train, int k,
                                  std::uint64_t seed) {
  if (k < 2) throw ArgumentError("stratified folds: k must be >= 2, got " + std::to_string(k));
  std::vector<int> folds(train.size(), -1);
  Rng rng(seed);
  std::size_t offset = 0;
  for (auto& [cls, idx] : group_by_class(train)) {
    if (idx.size() < static_cast<std::size_t>(k))
      throw CurationError("stratified folds: class '" + label_name(train[idx.front()].label) +
                          "' has " + std::to_string(idx.size()) + " examples, fewer than k=" +
                          std::to_string(k));
    rng.shuffle(idx);
    // Rotating the start spreads remainders evenly over folds across classes.
    for (std::size_t i = 0; i < idx.size(); ++i)
      folds[idx[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
    offset = (offset + idx.size()) % static_cast<std::size_t>(k);
  }
  return folds;
}

TemporalSplit temporal_split(const std::vector<LabeledExample>& examples, UtcTime cutoff) {
  TemporalSplit out;
  for (const auto& e : examples) (e.created_at < cutoff ? out.train_pre : out.test_post).push_back(e);
  return out;
}

PurgeResult purge_ground_truth(const std::vector<LabeledExample>& dataset,
                               const std::set<std::string>& ground_truth_ids) {
  PurgeResult out;
  for (const auto& e : dataset) {
    if (ground_truth_ids.count(e.id)) ++out.removed;
    else out.examples.push_back(e);
  }
  if (out.examples.empty() && !dataset.empty())
    out.warning = "every example belonged to the ground-truth set; dataset is now empty";
  return out;
}

std::vector<LabeledExample> build_multiclass_dataset(
    const std::array<std::vector<LabeledExample>, kCategoryCount>& per_category,
    std::uint64_t seed) {
  std::vector<LabeledExample> out;
  for (auto c : kAllCategories) {
    const auto& bucket = per_category[index_of(c)];
    if (bucket.empty())
      throw CurationError("multiclass dataset: category " + std::string(category_name(c)) +
                          " has no examples");
    for (const auto& e : bucket) {
      out.push_back(e);
      out.back().label = c;
    }
  }
  Rng rng(seed);
  rng.shuffle(out);
  return out;
}

std::map<std::string, std::map<std::string, std::size_t>> DatasetBundle::class_counts() const {
  std::map<std::string, std::map<std::string, std::size_t>> out;
  auto tally = [&](const char* part, const std::vector<LabeledExample>& xs) {
    auto& m = out[part];
    for (const auto& e : xs) ++m[label_name(e.label)];
  };
  tally("train", train);
  tally("test", test);
  tally("ood", ood);
  return out;
}

DatasetBundle make_bundle(std::string name, const std::vector<LabeledExample>& dataset,
                          const BundleOptions& options) {
  if (dataset.empty()) throw CurationError("bundle '" + name + "': dataset is empty");
  DatasetBundle b;
  b.name = std::move(name);
  b.task = std::holds_alternative<bool>(dataset.front().label) ? TaskKind::Binary
                                                               : TaskKind::Multiclass;
  b.seed = options.seed;

  auto carved = carve_ood(dataset, options.ood_top_n);
  b.ood = std::move(carved.ood);
  b.withheld_repos = std::move(carved.withheld_repos);
  std::vector<LabeledExample> main = std::move(carved.main);
  if (b.task == TaskKind::Binary) {
    auto rb = rebalance_binary(main, derive_seed(options.seed, "rebalance"));
    main = std::move(rb.examples);
    b.dropped_for_balance = rb.dropped;
  }
  auto tt = split_train_test(main, options.ratio, derive_seed(options.seed, "split"));
  b.train = std::move(tt.train);
  b.test = std::move(tt.test);
  b.folds = stratified_folds(b.train, options.k, derive_seed(options.seed, "folds"));
  return b;
}

DatasetBundle make_temporal_bundle(std::string name, const std::vector<LabeledExample>& dataset,
                                   UtcTime cutoff, int k, std::uint64_t seed) {
  if (dataset.empty()) throw CurationError("bundle '" + name + "': dataset is empty");
  DatasetBundle b;
  b.name = std::move(name);
  b.task = std::holds_alternative<bool>(dataset.front().label) ? TaskKind::Binary
                                                               : TaskKind::Multiclass;
  b.seed = seed;
  auto ts = temporal_split(dataset, cutoff);
  b.train = std::move(ts.train_pre);
  b.test = std::move(ts.test_post);
  b.folds = stratified_folds(b.train, k, derive_seed(seed, "folds"));
  return b;
}

}  // namespace debtlens
