#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debtlens/common.hpp"

namespace debtlens {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(const std::vector<bool>& predictions, const std::vector<bool>& truths);

struct BasicMetrics {
  double precision = 0;
  double recall = 0;
  double accuracy = 0;
  double f1 = 0;
};

/// 0/0 quotients are defined as 0.
BasicMetrics basic_metrics(const ConfusionMatrix& cm);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const ConfusionMatrix& cm);

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};

/// One point per distinct score, by descending threshold, plus the origin.
std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& truths);

/// Trapezoidal area under a threshold-swept ROC curve. Tied scores form one
/// diagonal segment, which credits each tied pair with one half.
double roc_auc(std::span<const double> scores, const std::vector<bool>& truths);

struct EvalReport {
  std::string model;
  std::string split;
  ConfusionMatrix confusion;
  BasicMetrics basic;
  double mcc = 0;
  std::optional<double> auc;  // undefined when the split holds a single class
  std::map<std::string, std::uint64_t> support;
};

/// Binary report at `threshold` (score >= threshold predicts positive).
EvalReport evaluate_binary(std::string model, std::string split, std::span<const double> scores,
                           const std::vector<bool>& truths, double threshold = 0.5);

/// Macro-averaged one-vs-rest view of a multiclass prediction.
struct MulticlassReport {
  EvalReport summary;                  // macro precision/recall/f1, overall accuracy, macro AUC
  std::vector<EvalReport> per_class;   // one-vs-rest, split "<split>/<class>"
  double multiclass_mcc = 0;           // K-class Matthews correlation
};

/// `probabilities[i]` is the score vector of example i over `class_names`.
MulticlassReport evaluate_multiclass(std::string model, std::string split,
                                     const std::vector<std::vector<double>>& probabilities,
                                     const std::vector<std::size_t>& truths,
                                     const std::vector<std::string>& class_names);

/// Gorodkin's K-category correlation coefficient from a K x K confusion table
/// (rows truth, columns prediction). 0 when the denominator vanishes.
double multiclass_mcc(const std::vector<std::vector<std::uint64_t>>& table);

// ---------------------------------------------------------------------------
// Recall on positive-only ground truth, one row per category.

struct GroundTruthPredictions {
  /// Predicted category per ground-truth item.
  std::optional<std::vector<Category>> multiclass;
  /// Whether category c's binary classifier fired on each item.
  std::array<std::optional<std::vector<bool>>, kCategoryCount> per_category;
  /// Whether the TD binary classifier fired on each item.
  std::optional<std::vector<bool>> td_only;
};

struct GroundTruthRow {
  Category category;
  std::size_t support = 0;
  std::optional<double> multiclass_recall;
  std::optional<double> binary_recall;
  std::optional<double> td_recall;
};

/// An item counts for every category in its set. The multiclass model
/// identifies an item when its predicted category is in the item's set.
std::vector<GroundTruthRow> ground_truth_recall(const std::vector<CategorySet>& truth,
                                                const GroundTruthPredictions& predictions);

// ---------------------------------------------------------------------------
// Rendering

struct RenderedReport {
  std::string json;
  std::string text;
};

/// Rows sorted by (model, split); JSON carries full precision, text 4
/// significant digits.
RenderedReport render_report(std::vector<EvalReport> reports);
RenderedReport render_ground_truth(const std::vector<GroundTruthRow>& rows,
                                   const std::vector<std::string>& model_names);

}  // namespace debtlens
