#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "debtlens/common.hpp"
#include "debtlens/corpus.hpp"

namespace debtlens {

inline constexpr double kDefaultThreshold = 0.5;

/// Uniform scoring interface shared by the baseline and exported models.
///
/// Binary models return a probability from score(); multiclass models return
/// a probability vector (non-negative, summing to one) from score_multi().
/// Implementations are immutable after construction and may be scored from
/// many threads at once.
class TextClassifier {
 public:
  virtual ~TextClassifier() = default;

  virtual TaskKind task() const = 0;
  virtual std::string name() const = 0;
  /// "td", a category name, or "multiclass".
  virtual std::string target() const = 0;
  /// Output order of score_multi(); {"false", "true"} for binary models.
  virtual std::vector<std::string> class_names() const = 0;

  virtual double score(std::string_view text) const;
  virtual Eigen::VectorXd score_multi(std::string_view text) const;

  double threshold() const { return threshold_; }
  void set_threshold(double t);

  bool predict(std::string_view text) const { return score(text) >= threshold_; }
  /// Index of the most probable class.
  std::size_t predict_class(std::string_view text) const;

 private:
  double threshold_ = kDefaultThreshold;
};

/// Loads a baseline model file or an exported model directory.
std::shared_ptr<TextClassifier> load_classifier(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ensemble of one TD classifier and one binary classifier per category.

struct EnsembleVerdict {
  bool is_td = false;
  CategorySet typed_debt;
  double td_score = 0;
  std::array<std::optional<double>, kCategoryCount> category_scores;
};

/// is_td = td_score >= threshold; typed_debt holds c iff is_td and
/// category_scores[c] >= threshold.
EnsembleVerdict ensemble_combine(double td_score, const std::map<Category, double>& category_scores,
                                 double threshold = kDefaultThreshold);

class Ensemble {
 public:
  Ensemble(std::shared_ptr<const TextClassifier> td,
           std::map<Category, std::shared_ptr<const TextClassifier>> members,
           double threshold = kDefaultThreshold);

  EnsembleVerdict classify(std::string_view text) const;
  /// Categories without a member model; their verdicts stay untyped.
  std::vector<Category> missing_categories() const;

 private:
  std::shared_ptr<const TextClassifier> td_;
  std::map<Category, std::shared_ptr<const TextClassifier>> members_;
  double threshold_;
};

// ---------------------------------------------------------------------------

struct PredictionRow {
  std::string id;
  double score = 0;        // positive-class probability, or top-class probability
  std::size_t predicted = 0;  // 0/1 for binary, class index for multiclass
  std::vector<double> probabilities;  // multiclass only
};

std::vector<PredictionRow> predict_bundle(const TextClassifier& model,
                                          const std::vector<LabeledExample>& partition);

}  // namespace debtlens
