#include "debtlens/baseline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "debtlens/dataset_io.hpp"
#include "debtlens/unicode.hpp"

namespace debtlens {

std::vector<std::string> feature_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::u32string cps = unicode::decode(text);
  std::string cur;
  for (char32_t c : cps) {
    if (unicode::is_letter(c) || unicode::is_number(c)) {
      unicode::append_utf8(cur, c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::uint32_t feature_bucket(std::string_view token, std::uint32_t dim) {
  return static_cast<std::uint32_t>(fnv1a64(token) % dim);
}

SparseRows<double> featurize(std::span<const std::string> texts, std::uint32_t dim) {
  if (dim == 0) throw ArgumentError("featurize: dimension must be positive");
  using Triplet = Eigen::Triplet<double, std::ptrdiff_t>;
  std::vector<Triplet> triplets;
  std::unordered_map<std::uint32_t, double> counts;
  for (std::size_t row = 0; row < texts.size(); ++row) {
    counts.clear();
    for (const auto& tok : feature_tokens(texts[row])) counts[feature_bucket(tok, dim)] += 1.0;
    double norm = 0;
    for (const auto& [b, c] : counts) norm += c * c;
    norm = std::sqrt(norm);
    for (const auto& [b, c] : counts)
      triplets.emplace_back(static_cast<std::ptrdiff_t>(row), static_cast<std::ptrdiff_t>(b),
                            c / norm);
  }
  SparseRows<double> x(static_cast<std::ptrdiff_t>(texts.size()), static_cast<std::ptrdiff_t>(dim));
  x.setFromTriplets(triplets.begin(), triplets.end());
  return x;
}

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double k = static_cast<double>(counts.size());
  std::vector<double> w;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0)
      throw TrainingError("class weights: class " + std::to_string(c) + " has no examples");
    w.push_back(total / (k * static_cast<double>(counts[c])));
  }
  return w;
}

// ---------------------------------------------------------------------------

BaselineModel::BaselineModel(TaskKind task, std::string target,
                             std::vector<std::string> class_names, std::uint32_t dim,
                             std::uint64_t seed)
    : task_(task),
      target_(std::move(target)),
      class_names_(std::move(class_names)),
      dim_(dim),
      seed_(seed) {
  if (dim_ == 0) throw ArgumentError("baseline model: dimension must be positive");
  if (task_ == TaskKind::Binary && class_names_.size() != 2)
    throw ArgumentError("baseline model: binary task needs two class names");
  if (task_ == TaskKind::Multiclass && class_names_.size() < 2)
    throw ArgumentError("baseline model: multiclass task needs at least two classes");
  const Eigen::Index outputs = task_ == TaskKind::Binary ? 1 : static_cast<Eigen::Index>(class_names_.size());
  weights_ = Eigen::MatrixXd::Zero(dim_, outputs);
  bias_ = Eigen::VectorXd::Zero(outputs);
  class_weights_.assign(class_names_.size(), 1.0);
}

void BaselineModel::set_class_weights(std::vector<double> w) {
  if (w.size() != class_names_.size())
    throw ArgumentError("baseline model: class weight count does not match class count");
  for (double v : w)
    if (!std::isfinite(v) || v <= 0) throw ArgumentError("baseline model: class weights must be finite and positive");
  class_weights_ = std::move(w);
}

Eigen::MatrixXd BaselineModel::logits(const SparseRows<double>& features) const {
  Eigen::MatrixXd z = features * weights_;
  z.rowwise() += bias_.transpose();
  return z;
}

double BaselineModel::score(std::string_view text) const {
  if (task_ != TaskKind::Binary) return TextClassifier::score(text);
  const std::string s(text);
  auto z = logits(featurize(std::span<const std::string>(&s, 1), dim_));
  return sigmoid(z(0, 0));
}

Eigen::VectorXd BaselineModel::score_multi(std::string_view text) const {
  const std::string s(text);
  auto z = logits(featurize(std::span<const std::string>(&s, 1), dim_));
  if (task_ == TaskKind::Binary) {
    const double p = sigmoid(z(0, 0));
    return Eigen::Vector2d(1.0 - p, p);
  }
  return softmax_rows<double>(z).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Serialization: little-endian, "DLBM" magic, then versioned fields. Weights
// are stored as (row, outputs...) for rows with any non-zero entry.

namespace {

constexpr char kMagic[4] = {'D', 'L', 'B', 'M'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void pod(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    pod(static_cast<std::uint32_t>(v.size()));
    for (double d : v) pod(d);
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is_) fail("truncated file");
    return v;
  }
  std::string str() {
    auto n = pod<std::uint32_t>();
    if (n > (1u << 20)) fail("implausible string length");
    std::string s(n, '\0');
    is_.read(s.data(), n);
    if (!is_) fail("truncated file");
    return s;
  }
  std::vector<double> doubles() {
    auto n = pod<std::uint32_t>();
    if (n > (1u << 24)) fail("implausible vector length");
    std::vector<double> v(n);
    for (auto& d : v) d = pod<double>();
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw LoadError("baseline model '" + path_ + "': " + what);
  }

 private:
  std::istream& is_;
  std::string path_;
};

}  // namespace

void BaselineModel::save(const std::filesystem::path& path) const {
  std::ostringstream os(std::ios::binary);
  Writer w(os);
  os.write(kMagic, 4);
  w.pod(kFormatVersion);
  w.pod(static_cast<std::uint8_t>(task_ == TaskKind::Binary ? 0 : 1));
  w.pod(dim_);
  w.pod(static_cast<std::uint32_t>(weights_.cols()));
  w.pod(seed_);
  w.str(target_);
  w.pod(static_cast<std::uint32_t>(class_names_.size()));
  for (const auto& n : class_names_) w.str(n);
  w.doubles(std::vector<double>(bias_.data(), bias_.data() + bias_.size()));
  w.doubles(class_weights_);
  w.doubles(loss_trace_);
  std::uint64_t rows = 0;
  for (Eigen::Index r = 0; r < weights_.rows(); ++r)
    if (!weights_.row(r).isZero(0.0)) ++rows;
  w.pod(rows);
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
    if (weights_.row(r).isZero(0.0)) continue;
    w.pod(static_cast<std::uint32_t>(r));
    for (Eigen::Index c = 0; c < weights_.cols(); ++c) w.pod(weights_(r, c));
  }
  atomic_write(path, os.str());
}

BaselineModel BaselineModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open model file '" + path.string() + "'");
  Reader r(is, path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kMagic)) r.fail("not a baseline model file");
  auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) r.fail("unsupported format version " + std::to_string(version));
  auto task_tag = r.pod<std::uint8_t>();
  if (task_tag > 1) r.fail("unknown task tag");
  auto dim = r.pod<std::uint32_t>();
  auto outputs = r.pod<std::uint32_t>();
  auto seed = r.pod<std::uint64_t>();
  auto target = r.str();
  auto n_classes = r.pod<std::uint32_t>();
  if (n_classes > 4096) r.fail("implausible class count");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < n_classes; ++i) names.push_back(r.str());

  const TaskKind task = task_tag == 0 ? TaskKind::Binary : TaskKind::Multiclass;
  std::optional<BaselineModel> model;
  try {
    model.emplace(task, target, names, dim, seed);
  } catch (const ArgumentError& e) {
    r.fail(e.what());
  }
  if (static_cast<std::uint32_t>(model->weights_.cols()) != outputs) r.fail("output width mismatch");
  auto bias = r.doubles();
  if (bias.size() != outputs) r.fail("bias length mismatch");
  model->bias_ = Eigen::Map<Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
  try {
    model->set_class_weights(r.doubles());
  } catch (const ArgumentError& e) {
    r.fail(e.what());
  }
  model->loss_trace_ = r.doubles();
  auto rows = r.pod<std::uint64_t>();
  if (rows > dim) r.fail("more weight rows than dimensions");
  for (std::uint64_t i = 0; i < rows; ++i) {
    auto row = r.pod<std::uint32_t>();
    if (row >= dim) r.fail("weight row out of range");
    for (std::uint32_t c = 0; c < outputs; ++c) model->weights_(row, c) = r.pod<double>();
  }
  if (is.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after weights");
  return std::move(*model);
}

// ---------------------------------------------------------------------------
// Training

namespace {

SparseRows<double> select_rows(const SparseRows<double>& x, const std::vector<std::size_t>& rows) {
  using Triplet = Eigen::Triplet<double, std::ptrdiff_t>;
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseRows<double>::InnerIterator it(x, static_cast<std::ptrdiff_t>(rows[i])); it; ++it)
      t.emplace_back(static_cast<std::ptrdiff_t>(i), it.col(), it.value());
  }
  SparseRows<double> out(static_cast<std::ptrdiff_t>(rows.size()), x.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

std::string fold_tag(int fold) { return fold < 0 ? "final" : std::to_string(fold); }

void check_finite(double loss, int epoch, int fold) {
  if (!std::isfinite(loss))
    throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + " (fold " +
                        fold_tag(fold) + ")");
}

struct FoldPlan {
  std::vector<std::size_t> train, valid;
};

std::vector<FoldPlan> plan_folds(std::span<const int> folds, std::size_t n) {
  if (folds.empty()) return {};
  if (folds.size() != n)
    throw ArgumentError("fold map has " + std::to_string(folds.size()) + " entries for " +
                        std::to_string(n) + " examples");
  const int k = *std::max_element(folds.begin(), folds.end()) + 1;
  if (*std::min_element(folds.begin(), folds.end()) < 0) throw ArgumentError("negative fold index");
  std::vector<FoldPlan> plans(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (int f = 0; f < k; ++f)
      (folds[i] == f ? plans[static_cast<std::size_t>(f)].valid
                     : plans[static_cast<std::size_t>(f)].train)
          .push_back(i);
  return plans;
}

// Fits weights/bias in place; returns the loss trace (initial + per epoch).
std::vector<double> fit_logistic(const SparseRows<double>& x, const Eigen::VectorXd& y,
                                 const std::vector<double>& class_weights,
                                 const TrainOptions& opt, int fold, Eigen::VectorXd& w, double& b) {
  Eigen::VectorXd s(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) s[i] = class_weights[y[i] > 0.5 ? 1 : 0];
  std::vector<double> trace;
  double loss = weighted_logistic_loss<double>(x, y, s, w, b);
  check_finite(loss, 0, fold);
  trace.push_back(loss);
  Eigen::VectorXd gw;
  double gb = 0;
  for (int e = 1; e <= opt.epochs; ++e) {
    weighted_logistic_gradient<double>(x, y, s, w, b, gw, gb);
    w -= opt.learning_rate * gw;
    b -= opt.learning_rate * gb;
    loss = weighted_logistic_loss<double>(x, y, s, w, b);
    check_finite(loss, e, fold);
    trace.push_back(loss);
  }
  return trace;
}

std::vector<double> fit_softmax(const SparseRows<double>& x, std::span<const std::size_t> labels,
                                const std::vector<double>& class_weights, const TrainOptions& opt,
                                int fold, Eigen::MatrixXd& w, Eigen::VectorXd& b) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) s[static_cast<Eigen::Index>(i)] = class_weights[labels[i]];
  std::vector<double> trace;
  double loss = weighted_softmax_loss<double>(x, labels, s, w, b);
  check_finite(loss, 0, fold);
  trace.push_back(loss);
  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  for (int e = 1; e <= opt.epochs; ++e) {
    weighted_softmax_gradient<double>(x, labels, s, w, b, gw, gb);
    w -= opt.learning_rate * gw;
    b -= opt.learning_rate * gb;
    loss = weighted_softmax_loss<double>(x, labels, s, w, b);
    check_finite(loss, e, fold);
    trace.push_back(loss);
  }
  return trace;
}

void check_options(const TrainOptions& opt) {
  if (opt.epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (!(opt.learning_rate > 0) || !std::isfinite(opt.learning_rate))
    throw ArgumentError("learning rate must be a positive finite number");
}

}  // namespace

BinaryTrainResult train_logistic(std::span<const std::string> texts, const std::vector<bool>& labels,
                                 std::span<const int> folds, const TrainOptions& options,
                                 std::string target) {
  check_options(options);
  if (texts.size() != labels.size()) throw ArgumentError("texts and labels differ in length");
  const auto x = featurize(texts, options.dim);
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i] ? 1.0 : 0.0;

  auto weights_for = [&](const std::vector<std::size_t>& rows) {
    std::array<std::size_t, 2> counts{0, 0};
    for (auto r : rows) ++counts[labels[r] ? 1 : 0];
    if (counts[0] == 0 || counts[1] == 0)
      throw TrainingError("binary training set lacks one class (" + std::to_string(counts[1]) +
                          " positives, " + std::to_string(counts[0]) + " negatives)");
    return inverse_frequency_weights(counts);
  };

  BinaryTrainResult result{BaselineModel(TaskKind::Binary, target, {"false", "true"}, options.dim,
                                         options.seed),
                           {}};
  const auto plans = plan_folds(folds, texts.size());
  for (std::size_t f = 0; f < plans.size(); ++f) {
    const auto& plan = plans[f];
    auto cw = weights_for(plan.train);
    auto xt = select_rows(x, plan.train);
    Eigen::VectorXd yt(static_cast<Eigen::Index>(plan.train.size()));
    for (std::size_t i = 0; i < plan.train.size(); ++i) yt[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(plan.train[i])];
    Eigen::VectorXd w = Eigen::VectorXd::Zero(options.dim);
    double b = 0;
    fit_logistic(xt, yt, cw, options, static_cast<int>(f), w, b);

    auto xv = select_rows(x, plan.valid);
    Eigen::VectorXd z = (xv * w).array() + b;
    std::vector<double> scores(plan.valid.size());
    std::vector<bool> truth(plan.valid.size());
    for (std::size_t i = 0; i < plan.valid.size(); ++i) {
      scores[i] = sigmoid(z[static_cast<Eigen::Index>(i)]);
      truth[i] = labels[plan.valid[i]];
    }
    result.fold_reports.push_back(evaluate_binary(result.model.name(), "fold-" + std::to_string(f),
                                                  scores, truth, options.threshold));
  }

  std::vector<std::size_t> all(texts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto cw = weights_for(all);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(options.dim);
  double b = 0;
  auto trace = fit_logistic(x, y, cw, options, -1, w, b);
  result.model.mutable_weights().col(0) = w;
  result.model.mutable_bias()[0] = b;
  result.model.set_class_weights(cw);
  result.model.set_loss_trace(std::move(trace));
  result.model.set_threshold(options.threshold);
  return result;
}

MulticlassTrainResult train_softmax(std::span<const std::string> texts,
                                    std::span<const std::size_t> labels,
                                    std::vector<std::string> class_names,
                                    std::span<const int> folds, const TrainOptions& options) {
  check_options(options);
  if (texts.size() != labels.size()) throw ArgumentError("texts and labels differ in length");
  const std::size_t k = class_names.size();
  for (auto l : labels)
    if (l >= k) throw ArgumentError("label index " + std::to_string(l) + " out of range");
  const auto x = featurize(texts, options.dim);

  auto weights_for = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> counts(k, 0);
    for (auto r : rows) ++counts[labels[r]];
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] == 0) throw TrainingError("multiclass training set lacks class '" + class_names[c] + "'");
    return inverse_frequency_weights(counts);
  };

  MulticlassTrainResult result{BaselineModel(TaskKind::Multiclass, "multiclass", class_names,
                                             options.dim, options.seed),
                               {}};
  const auto plans = plan_folds(folds, texts.size());
  const auto outputs = static_cast<Eigen::Index>(k);
  for (std::size_t f = 0; f < plans.size(); ++f) {
    const auto& plan = plans[f];
    auto cw = weights_for(plan.train);
    auto xt = select_rows(x, plan.train);
    std::vector<std::size_t> lt;
    for (auto r : plan.train) lt.push_back(labels[r]);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(options.dim, outputs);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(outputs);
    fit_softmax(xt, lt, cw, options, static_cast<int>(f), w, b);

    auto xv = select_rows(x, plan.valid);
    Eigen::MatrixXd z = xv * w;
    z.rowwise() += b.transpose();
    Eigen::MatrixXd p = softmax_rows<double>(z);
    std::vector<std::vector<double>> probs;
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < plan.valid.size(); ++i) {
      std::vector<double> row(k);
      for (std::size_t c = 0; c < k; ++c)
        row[c] = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      probs.push_back(std::move(row));
      truth.push_back(labels[plan.valid[i]]);
    }
    result.fold_reports.push_back(evaluate_multiclass(
        result.model.name(), "fold-" + std::to_string(f), probs, truth, class_names));
  }

  std::vector<std::size_t> all(texts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto cw = weights_for(all);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(options.dim, outputs);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(outputs);
  auto trace = fit_softmax(x, labels, cw, options, -1, w, b);
  result.model.mutable_weights() = std::move(w);
  result.model.mutable_bias() = std::move(b);
  result.model.set_class_weights(cw);
  result.model.set_loss_trace(std::move(trace));
  result.model.set_threshold(options.threshold);
  return result;
}

BinaryTrainResult train_baseline_binary(const std::vector<LabeledExample>& train,
                                        std::span<const int> folds, const TrainOptions& options,
                                        std::string target) {
  std::vector<std::string> texts;
  std::vector<bool> labels;
  for (const auto& e : train) {
    const bool* b = std::get_if<bool>(&e.label);
    if (!b) throw TrainingError("binary training received a category-labelled example (" + e.id + ")");
    texts.push_back(e.text);
    labels.push_back(*b);
  }
  return train_logistic(texts, labels, folds, options, std::move(target));
}

MulticlassTrainResult train_baseline_multiclass(const std::vector<LabeledExample>& train,
                                                std::span<const int> folds,
                                                const TrainOptions& options) {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  CategorySet present;
  for (const auto& e : train) {
    const Category* c = std::get_if<Category>(&e.label);
    if (!c) throw TrainingError("multiclass training received a binary-labelled example (" + e.id + ")");
    texts.push_back(e.text);
    labels.push_back(index_of(*c));
    present.insert(*c);
  }
  for (auto c : kAllCategories)
    if (!present.contains(c))
      throw TrainingError("multiclass training: category " + std::string(category_name(c)) +
                          " has no examples");
  std::vector<std::string> names;
  for (auto c : kAllCategories) names.emplace_back(category_name(c));
  return train_softmax(texts, labels, std::move(names), folds, options);
}

}  // namespace debtlens
