#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "debtlens/classifier.hpp"
#include "debtlens/metrics.hpp"

namespace debtlens {

// ---------------------------------------------------------------------------
// Hashed bag-of-words features.

inline constexpr std::uint32_t kDefaultFeatureDim = 1u << 18;

template <typename Scalar>
using SparseRows = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, std::ptrdiff_t>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Maximal runs of letters/digits.
std::vector<std::string> feature_tokens(std::string_view text);

/// Bucket of a token under the FNV-1a hash.
std::uint32_t feature_bucket(std::string_view token, std::uint32_t dim);

/// One row per text: token counts hashed into `dim` buckets, L2-normalised.
/// Rows of empty texts are all zero.
SparseRows<double> featurize(std::span<const std::string> texts, std::uint32_t dim);

// ---------------------------------------------------------------------------
// Weighted objectives. Templated on the scalar so gradients can be checked in
// extended precision.

template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::exp;
  using std::log1p;
  return z > Scalar(0) ? z + log1p(exp(-z)) : log1p(exp(z));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

/// sum_i s_i [softplus(z_i) - y_i z_i] / sum_i s_i with z = X w + b.
template <typename Scalar>
Scalar weighted_logistic_loss(const SparseRows<Scalar>& x, const VectorX<Scalar>& y,
                              const VectorX<Scalar>& sample_weight, const VectorX<Scalar>& w,
                              Scalar b) {
  const VectorX<Scalar> z = (x * w).array() + b;
  Scalar total(0);
  for (Eigen::Index i = 0; i < z.size(); ++i)
    total += sample_weight[i] * (softplus(z[i]) - y[i] * z[i]);
  return total / sample_weight.sum();
}

template <typename Scalar>
void weighted_logistic_gradient(const SparseRows<Scalar>& x, const VectorX<Scalar>& y,
                                const VectorX<Scalar>& sample_weight, const VectorX<Scalar>& w,
                                Scalar b, VectorX<Scalar>& grad_w, Scalar& grad_b) {
  const VectorX<Scalar> z = (x * w).array() + b;
  VectorX<Scalar> r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = sample_weight[i] * (sigmoid(z[i]) - y[i]);
  const Scalar norm = sample_weight.sum();
  grad_w = (x.transpose() * r) / norm;
  grad_b = r.sum() / norm;
}

/// Row-wise softmax of logits (n x K), computed stably.
template <typename Scalar>
MatrixX<Scalar> softmax_rows(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// sum_i s_i [logsumexp(z_i) - z_i[label_i]] / sum_i s_i with Z = X W + 1 b^T.
template <typename Scalar>
Scalar weighted_softmax_loss(const SparseRows<Scalar>& x, std::span<const std::size_t> labels,
                             const VectorX<Scalar>& sample_weight, const MatrixX<Scalar>& w,
                             const VectorX<Scalar>& b) {
  using std::exp;
  using std::log;
  MatrixX<Scalar> z = x * w;
  z.rowwise() += b.transpose();
  Scalar total(0);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar m = z.row(i).maxCoeff();
    const Scalar lse = m + log((z.row(i).array() - m).exp().sum());
    total += sample_weight[i] * (lse - z(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])));
  }
  return total / sample_weight.sum();
}

template <typename Scalar>
void weighted_softmax_gradient(const SparseRows<Scalar>& x, std::span<const std::size_t> labels,
                               const VectorX<Scalar>& sample_weight, const MatrixX<Scalar>& w,
                               const VectorX<Scalar>& b, MatrixX<Scalar>& grad_w,
                               VectorX<Scalar>& grad_b) {
  MatrixX<Scalar> z = x * w;
  z.rowwise() += b.transpose();
  MatrixX<Scalar> r = softmax_rows(z);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    r(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= Scalar(1);
    r.row(i) *= sample_weight[i];
  }
  const Scalar norm = sample_weight.sum();
  grad_w = (x.transpose() * r) / norm;
  grad_b = r.colwise().sum().transpose() / norm;
}

/// total / (K * count_c) per class. Every count must be positive.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts);

// ---------------------------------------------------------------------------
// Baseline model

class BaselineModel final : public TextClassifier {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  BaselineModel(TaskKind task, std::string target, std::vector<std::string> class_names,
                std::uint32_t dim, std::uint64_t seed = 0);

  TaskKind task() const override { return task_; }
  std::string name() const override { return "baseline:" + target_; }
  std::string target() const override { return target_; }
  std::vector<std::string> class_names() const override { return class_names_; }

  double score(std::string_view text) const override;
  Eigen::VectorXd score_multi(std::string_view text) const override;

  /// Logits for a featurised batch (n x outputs).
  Eigen::MatrixXd logits(const SparseRows<double>& features) const;

  std::uint32_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  /// D x 1 for binary models, D x K for multiclass.
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  const std::vector<double>& class_weights() const { return class_weights_; }
  const std::vector<double>& loss_trace() const { return loss_trace_; }

  Eigen::MatrixXd& mutable_weights() { return weights_; }
  Eigen::VectorXd& mutable_bias() { return bias_; }
  void set_class_weights(std::vector<double> w);
  void set_loss_trace(std::vector<double> trace) { loss_trace_ = std::move(trace); }

  void save(const std::filesystem::path& path) const;
  static BaselineModel load(const std::filesystem::path& path);

 private:
  TaskKind task_;
  std::string target_;
  std::vector<std::string> class_names_;
  std::uint32_t dim_;
  std::uint64_t seed_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  std::vector<double> class_weights_;
  std::vector<double> loss_trace_;
};

struct TrainOptions {
  int epochs = 5;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  std::uint32_t dim = kDefaultFeatureDim;
  double threshold = kDefaultThreshold;
};

struct BinaryTrainResult {
  BaselineModel model;
  std::vector<EvalReport> fold_reports;  // split "fold-<i>"
};

struct MulticlassTrainResult {
  BaselineModel model;
  std::vector<MulticlassReport> fold_reports;
};

/// Logistic regression by full-batch gradient descent: one model per fold
/// (trained on the other folds, validated on the held-out fold), then a final
/// model on all of `texts`. An empty `folds` skips cross-validation.
BinaryTrainResult train_logistic(std::span<const std::string> texts, const std::vector<bool>& labels,
                                 std::span<const int> folds, const TrainOptions& options,
                                 std::string target = "td");

/// Class-weighted softmax regression over `class_names.size()` classes.
MulticlassTrainResult train_softmax(std::span<const std::string> texts,
                                    std::span<const std::size_t> labels,
                                    std::vector<std::string> class_names,
                                    std::span<const int> folds, const TrainOptions& options);

/// Binary examples (bool labels).
BinaryTrainResult train_baseline_binary(const std::vector<LabeledExample>& train,
                                        std::span<const int> folds, const TrainOptions& options,
                                        std::string target = "td");

/// Category examples; every one of the 13 categories must be present.
MulticlassTrainResult train_baseline_multiclass(const std::vector<LabeledExample>& train,
                                                std::span<const int> folds,
                                                const TrainOptions& options);

}  // namespace debtlens
