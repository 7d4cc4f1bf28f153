#include "debtlens/classifier.hpp"

#include <cmath>

#include "debtlens/baseline.hpp"
#include "debtlens/exported_model.hpp"

namespace debtlens {

double TextClassifier::score(std::string_view) const {
  throw ArgumentError("model '" + name() + "' is multiclass; use score_multi");
}

Eigen::VectorXd TextClassifier::score_multi(std::string_view text) const {
  if (task() != TaskKind::Binary) throw ArgumentError("model '" + name() + "' has no score_multi");
  const double p = score(text);
  return Eigen::Vector2d(1.0 - p, p);
}

void TextClassifier::set_threshold(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("threshold must lie in [0, 1]");
  threshold_ = t;
}

std::size_t TextClassifier::predict_class(std::string_view text) const {
  if (task() == TaskKind::Binary) return predict(text) ? 1 : 0;
  Eigen::Index best = 0;
  score_multi(text).maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

std::shared_ptr<TextClassifier> load_classifier(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec))
    throw LoadError("model path does not exist: '" + path.string() + "'");
  if (std::filesystem::is_directory(path, ec)) return load_exported_model(path);
  return std::make_shared<BaselineModel>(BaselineModel::load(path));
}

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError(what + " score outside [0, 1]: " + std::to_string(p));
}

}  // namespace

EnsembleVerdict ensemble_combine(double td_score, const std::map<Category, double>& category_scores,
                                 double threshold) {
  check_probability(td_score, "TD");
  EnsembleVerdict v;
  v.td_score = td_score;
  v.is_td = td_score >= threshold;
  for (const auto& [c, s] : category_scores) {
    check_probability(s, std::string(category_name(c)));
    v.category_scores[index_of(c)] = s;
    if (v.is_td && s >= threshold) v.typed_debt.insert(c);
  }
  return v;
}

Ensemble::Ensemble(std::shared_ptr<const TextClassifier> td,
                   std::map<Category, std::shared_ptr<const TextClassifier>> members,
                   double threshold)
    : td_(std::move(td)), members_(std::move(members)), threshold_(threshold) {
  if (!td_) throw ArgumentError("ensemble: TD classifier is required");
  if (td_->task() != TaskKind::Binary) throw ArgumentError("ensemble: TD classifier must be binary");
  for (const auto& [c, m] : members_)
    if (!m || m->task() != TaskKind::Binary)
      throw ArgumentError("ensemble: member for " + std::string(category_name(c)) +
                          " must be a binary classifier");
}

EnsembleVerdict Ensemble::classify(std::string_view text) const {
  std::map<Category, double> scores;
  for (const auto& [c, m] : members_) scores[c] = m->score(text);
  return ensemble_combine(td_->score(text), scores, threshold_);
}

std::vector<Category> Ensemble::missing_categories() const {
  std::vector<Category> out;
  for (auto c : kAllCategories)
    if (!members_.count(c)) out.push_back(c);
  return out;
}

std::vector<PredictionRow> predict_bundle(const TextClassifier& model,
                                          const std::vector<LabeledExample>& partition) {
  std::vector<PredictionRow> rows;
  rows.reserve(partition.size());
  for (const auto& e : partition) {
    PredictionRow row;
    row.id = e.id;
    if (model.task() == TaskKind::Binary) {
      row.score = model.score(e.text);
      row.predicted = row.score >= model.threshold() ? 1 : 0;
    } else {
      Eigen::VectorXd p = model.score_multi(e.text);
      Eigen::Index best = 0;
      row.score = p.maxCoeff(&best);
      row.predicted = static_cast<std::size_t>(best);
      row.probabilities.assign(p.data(), p.data() + p.size());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace debtlens
