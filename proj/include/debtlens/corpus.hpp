#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "debtlens/common.hpp"
#include "debtlens/labeling.hpp"

namespace debtlens {

// ---------------------------------------------------------------------------
// Text cleaning

inline constexpr std::size_t kDefaultMinTextLength = 30;

enum class RejectReason { TooShort, NonEnglish };

struct CleanOptions {
  std::size_t min_length = kDefaultMinTextLength;  // in code points
  /// Optional language gate; returning false rejects the text. Off by default.
  std::function<bool(std::string_view)> language_filter;
};

struct CleanResult {
  std::optional<std::string> text;
  RejectReason reason = RejectReason::TooShort;

  bool accepted() const { return text.has_value(); }
};

/// title + " " + body, lowercased, with URLs, emoji and characters outside
/// letters/digits/whitespace/.,;:?!'"()- removed and whitespace collapsed.
CleanResult clean_text(std::string_view title, std::string_view body,
                       const CleanOptions& options = {});

/// The normalisation steps alone, without the length/language gates.
std::string normalize_text(std::string_view text);

// ---------------------------------------------------------------------------
// Examples and bundles

using ExampleLabel = std::variant<bool, Category>;

/// Stratification class: 0/1 for binary labels, the category index otherwise.
std::size_t class_index(const ExampleLabel& label);
std::string label_name(const ExampleLabel& label);

struct LabeledExample {
  std::string id;  // issue key of the source record
  std::string text;
  ExampleLabel label = false;
  std::string repo_name;
  UtcTime created_at{};
  LabelVerdict source_verdict;
};

/// Cleans one classified record into an example with the given label.
std::optional<LabeledExample> make_example(const ClassifiedRecord& record, ExampleLabel label,
                                           const CleanOptions& options = {});

/// Keeps the first example of every distinct cleaned text.
std::vector<LabeledExample> deduplicate(const std::vector<LabeledExample>& examples);

struct BalancedDataset {
  std::vector<LabeledExample> examples;  // positives (label true) then negatives (label false)
  std::size_t per_class = 0;
  std::optional<std::string> warning;    // set when positives were downsampled
};

/// n = min(|positives|, |negative_pool|) examples of each class, drawn by
/// seeded uniform sampling without replacement; input order is preserved.
BalancedDataset build_balanced_dataset(const std::vector<LabeledExample>& positives,
                                       const std::vector<LabeledExample>& negative_pool,
                                       std::uint64_t seed);

struct OodSplit {
  std::vector<LabeledExample> main;
  std::vector<LabeledExample> ood;
  std::vector<std::string> withheld_repos;
};

/// Withholds the `top_n` repositories with the most examples (ties broken by
/// repository name).
OodSplit carve_ood(const std::vector<LabeledExample>& examples, std::size_t top_n);

struct Rebalanced {
  std::vector<LabeledExample> examples;
  std::size_t dropped = 0;
};

/// Downsamples the majority class of a binary dataset to the minority size.
Rebalanced rebalance_binary(const std::vector<LabeledExample>& examples, std::uint64_t seed);

struct TrainTest {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

/// Per class, floor(ratio * n) shuffled examples go to train and the rest to test.
TrainTest split_train_test(const std::vector<LabeledExample>& dataset, double ratio,
                           std::uint64_t seed);

/// Fold index in [0, k) per example; per class, fold sizes differ by at most one.
std::vector<int> stratified_folds(const std::vector<LabeledExample>& train, int k,
                                  std::uint64_t seed);

struct TemporalSplit {
  std::vector<LabeledExample> train_pre;   // created_at < cutoff
  std::vector<LabeledExample> test_post;   // created_at >= cutoff
};

TemporalSplit temporal_split(const std::vector<LabeledExample>& examples, UtcTime cutoff);

struct PurgeResult {
  std::vector<LabeledExample> examples;
  std::size_t removed = 0;
  std::optional<std::string> warning;  // set when nothing survived
};

PurgeResult purge_ground_truth(const std::vector<LabeledExample>& dataset,
                               const std::set<std::string>& ground_truth_ids);

/// Union of category positives, one example per (text, category) pair, in
/// category order and then shuffled by `seed`. No balancing.
std::vector<LabeledExample> build_multiclass_dataset(
    const std::array<std::vector<LabeledExample>, kCategoryCount>& per_category,
    std::uint64_t seed);

enum class TaskKind { Binary, Multiclass };

inline std::string_view task_name(TaskKind t) {
  return t == TaskKind::Binary ? "binary" : "multiclass";
}

struct DatasetBundle {
  std::string name;
  TaskKind task = TaskKind::Binary;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::vector<LabeledExample> ood;
  std::vector<int> folds;  // one per train example
  std::uint64_t seed = 0;
  std::vector<std::string> withheld_repos;
  std::size_t dropped_for_balance = 0;

  /// partition name -> class name -> count
  std::map<std::string, std::map<std::string, std::size_t>> class_counts() const;
};

struct BundleOptions {
  double ratio = 0.85;
  int k = 5;
  std::size_t ood_top_n = 1;
  std::uint64_t seed = 0;
};

/// carve_ood -> (binary) rebalance -> split_train_test -> stratified_folds.
DatasetBundle make_bundle(std::string name, const std::vector<LabeledExample>& dataset,
                          const BundleOptions& options);

/// Train on examples before `cutoff`, test on the rest; folds over train.
DatasetBundle make_temporal_bundle(std::string name, const std::vector<LabeledExample>& dataset,
                                   UtcTime cutoff, int k, std::uint64_t seed);

}  // namespace debtlens
