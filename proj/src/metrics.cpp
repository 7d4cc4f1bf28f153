#include "debtlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace debtlens {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

ConfusionMatrix confusion(const std::vector<bool>& predictions, const std::vector<bool>& truths) {
  if (predictions.size() != truths.size())
    throw ArgumentError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(truths.size()) + " truths");
  if (predictions.empty()) throw ArgumentError("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (predictions[i]) (truths[i] ? cm.tp : cm.fp)++;
    else (truths[i] ? cm.fn : cm.tn)++;
  }
  return cm;
}

BasicMetrics basic_metrics(const ConfusionMatrix& cm) {
  const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
  const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
  BasicMetrics m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.accuracy = ratio(tp + tn, tp + fp + tn + fn);
  m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  return m;
}

double mcc(const ConfusionMatrix& cm) {
  const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
  const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
  const double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
  // Pairwise products stay exact for cells below ~4e7.
  const double num = tp * tn - fp * fn;
  const double den = std::sqrt(a * b) * std::sqrt(c * d);
  return std::clamp(num / den, -1.0, 1.0);
}

namespace {

struct SweepStep {
  double threshold;
  std::uint64_t tp;
  std::uint64_t fp;
};

std::vector<SweepStep> sweep(std::span<const double> scores, const std::vector<bool>& truths,
                             std::uint64_t& positives, std::uint64_t& negatives) {
  if (scores.size() != truths.size())
    throw ArgumentError("roc: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(truths.size()) + " truths");
  positives = static_cast<std::uint64_t>(std::count(truths.begin(), truths.end(), true));
  negatives = truths.size() - positives;
  if (positives == 0 || negatives == 0)
    throw MetricError("AUC undefined: truth labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<SweepStep> steps;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (truths[order[i]] ? tp : fp)++;
      ++i;
    }
    steps.push_back({s, tp, fp});
  }
  return steps;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& truths) {
  std::uint64_t p = 0, n = 0;
  auto steps = sweep(scores, truths, p, n);
  std::vector<RocPoint> out;
  out.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const auto& s : steps)
    out.push_back({s.threshold, static_cast<double>(s.tp) / static_cast<double>(p),
                   static_cast<double>(s.fp) / static_cast<double>(n)});
  return out;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& truths) {
  std::uint64_t p = 0, n = 0;
  auto steps = sweep(scores, truths, p, n);
  // Twice the area in units of (1/P)(1/N), accumulated exactly.
  unsigned __int128 twice_area = 0;
  std::uint64_t prev_tp = 0, prev_fp = 0;
  for (const auto& s : steps) {
    twice_area += static_cast<unsigned __int128>(s.fp - prev_fp) * (s.tp + prev_tp);
    prev_tp = s.tp;
    prev_fp = s.fp;
  }
  return static_cast<double>(static_cast<long double>(twice_area) /
                             (2.0L * static_cast<long double>(p) * static_cast<long double>(n)));
}

EvalReport evaluate_binary(std::string model, std::string split, std::span<const double> scores,
                           const std::vector<bool>& truths, double threshold) {
  std::vector<bool> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= threshold;
  EvalReport r;
  r.model = std::move(model);
  r.split = std::move(split);
  r.confusion = confusion(preds, truths);
  r.basic = basic_metrics(r.confusion);
  r.mcc = debtlens::mcc(r.confusion);
  const auto pos = static_cast<std::uint64_t>(std::count(truths.begin(), truths.end(), true));
  if (pos > 0 && pos < truths.size()) r.auc = roc_auc(scores, truths);
  r.support["true"] = pos;
  r.support["false"] = truths.size() - pos;
  return r;
}

double multiclass_mcc(const std::vector<std::vector<std::uint64_t>>& table) {
  const std::size_t k = table.size();
  std::vector<long double> t(k, 0), p(k, 0);
  long double correct = 0, s = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto v = static_cast<long double>(table[i][j]);
      t[i] += v;
      p[j] += v;
      s += v;
    }
    correct += static_cast<long double>(table[i][i]);
  }
  long double tp_sum = 0, tt = 0, pp = 0;
  for (std::size_t i = 0; i < k; ++i) {
    tp_sum += t[i] * p[i];
    tt += t[i] * t[i];
    pp += p[i] * p[i];
  }
  const long double den = std::sqrt(s * s - pp) * std::sqrt(s * s - tt);
  if (den == 0) return 0.0;
  return static_cast<double>((correct * s - tp_sum) / den);
}

MulticlassReport evaluate_multiclass(std::string model, std::string split,
                                     const std::vector<std::vector<double>>& probabilities,
                                     const std::vector<std::size_t>& truths,
                                     const std::vector<std::string>& class_names) {
  const std::size_t k = class_names.size();
  if (probabilities.size() != truths.size())
    throw ArgumentError("evaluate_multiclass: probabilities and truths differ in length");
  if (truths.empty()) throw ArgumentError("evaluate_multiclass: empty input");

  std::vector<std::size_t> predicted(truths.size());
  std::vector<std::vector<std::uint64_t>> table(k, std::vector<std::uint64_t>(k, 0));
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (probabilities[i].size() != k || truths[i] >= k)
      throw ArgumentError("evaluate_multiclass: example " + std::to_string(i) +
                          " does not match the class list");
    predicted[i] = static_cast<std::size_t>(
        std::max_element(probabilities[i].begin(), probabilities[i].end()) -
        probabilities[i].begin());
    ++table[truths[i]][predicted[i]];
  }

  MulticlassReport out;
  out.summary.model = model;
  out.summary.split = split;
  double sum_p = 0, sum_r = 0, sum_f = 0, sum_auc = 0;
  std::size_t n_auc = 0;
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> scores(truths.size());
    std::vector<bool> truth(truths.size()), pred(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
      scores[i] = probabilities[i][c];
      truth[i] = truths[i] == c;
      pred[i] = predicted[i] == c;
    }
    EvalReport r;
    r.model = model;
    r.split = split + "/" + class_names[c];
    r.confusion = confusion(pred, truth);
    r.basic = basic_metrics(r.confusion);
    r.mcc = debtlens::mcc(r.confusion);
    const auto pos = r.confusion.tp + r.confusion.fn;
    if (pos > 0 && pos < truths.size()) {
      r.auc = roc_auc(scores, truth);
      sum_auc += *r.auc;
      ++n_auc;
    }
    r.support["true"] = pos;
    r.support["false"] = truths.size() - pos;
    out.summary.support[class_names[c]] = pos;
    out.summary.confusion.tp += r.confusion.tp;
    out.summary.confusion.fp += r.confusion.fp;
    out.summary.confusion.tn += r.confusion.tn;
    out.summary.confusion.fn += r.confusion.fn;
    sum_p += r.basic.precision;
    sum_r += r.basic.recall;
    sum_f += r.basic.f1;
    correct += table[c][c];
    out.per_class.push_back(std::move(r));
  }
  const double kd = static_cast<double>(k);
  out.summary.basic.precision = sum_p / kd;
  out.summary.basic.recall = sum_r / kd;
  out.summary.basic.f1 = sum_f / kd;
  out.summary.basic.accuracy = static_cast<double>(correct) / static_cast<double>(truths.size());
  out.multiclass_mcc = multiclass_mcc(table);
  out.summary.mcc = out.multiclass_mcc;
  if (n_auc > 0) out.summary.auc = sum_auc / static_cast<double>(n_auc);
  return out;
}

std::vector<GroundTruthRow> ground_truth_recall(const std::vector<CategorySet>& truth,
                                                const GroundTruthPredictions& predictions) {
  auto check = [&](std::size_t n, const char* what) {
    if (n != truth.size())
      throw ArgumentError(std::string("ground truth recall: ") + what + " has " +
                          std::to_string(n) + " predictions for " + std::to_string(truth.size()) +
                          " items");
  };
  if (predictions.multiclass) check(predictions.multiclass->size(), "multiclass");
  if (predictions.td_only) check(predictions.td_only->size(), "td-only");
  for (const auto& pc : predictions.per_category)
    if (pc) check(pc->size(), "per-category");

  std::vector<GroundTruthRow> rows;
  for (auto c : kAllCategories) {
    GroundTruthRow row;
    row.category = c;
    std::size_t mc_hits = 0, bin_hits = 0, td_hits = 0;
    const auto& bin = predictions.per_category[index_of(c)];
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (!truth[i].contains(c)) continue;
      ++row.support;
      if (predictions.multiclass && truth[i].contains((*predictions.multiclass)[i])) ++mc_hits;
      if (bin && (*bin)[i]) ++bin_hits;
      if (predictions.td_only && (*predictions.td_only)[i]) ++td_hits;
    }
    if (row.support > 0) {
      const double s = static_cast<double>(row.support);
      if (predictions.multiclass) row.multiclass_recall = static_cast<double>(mc_hits) / s;
      if (bin) row.binary_recall = static_cast<double>(bin_hits) / s;
      if (predictions.td_only) row.td_recall = static_cast<double>(td_hits) / s;
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string sig4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string sig4(const std::optional<double>& v) { return v ? sig4(*v) : "-"; }

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) os << "  ";
      os << cells[c];
      if (c + 1 < cells.size()) os << std::string(width[c] - cells[c].size(), ' ');
    }
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

RenderedReport render_report(std::vector<EvalReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    return std::tie(a.model, a.split) < std::tie(b.model, b.split);
  });
  auto arr = nlohmann::ordered_json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["split"] = r.split;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp},
                      {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    j["metrics"] = {{"precision", r.basic.precision}, {"recall", r.basic.recall},
                    {"accuracy", r.basic.accuracy},   {"f1", r.basic.f1},
                    {"mcc", r.mcc},                   {"auc", optional_json(r.auc)}};
    nlohmann::ordered_json support = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.support) support[k] = v;
    j["support"] = std::move(support);
    arr.push_back(std::move(j));
    rows.push_back({r.model, r.split, std::to_string(r.confusion.tp),
                    std::to_string(r.confusion.fp), std::to_string(r.confusion.tn),
                    std::to_string(r.confusion.fn), sig4(r.basic.precision), sig4(r.basic.recall),
                    sig4(r.basic.accuracy), sig4(r.basic.f1), sig4(r.mcc), sig4(r.auc)});
  }
  RenderedReport out;
  out.json = arr.dump(2) + "\n";
  out.text = format_table({"model", "split", "tp", "fp", "tn", "fn", "precision", "recall",
                           "accuracy", "f1", "mcc", "auc"},
                          rows);
  return out;
}

RenderedReport render_ground_truth(const std::vector<GroundTruthRow>& rows,
                                   const std::vector<std::string>& model_names) {
  // model_names: display names for (multiclass, binary, td) columns.
  auto arr = nlohmann::ordered_json::array();
  std::vector<std::vector<std::string>> text_rows;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["category"] = category_name(r.category);
    j["recall"] = {{model_names.at(0), optional_json(r.multiclass_recall)},
                   {model_names.at(1), optional_json(r.binary_recall)},
                   {model_names.at(2), optional_json(r.td_recall)}};
    j["support"] = r.support;
    arr.push_back(std::move(j));
    text_rows.push_back({std::string(category_name(r.category)), sig4(r.multiclass_recall),
                         sig4(r.binary_recall), sig4(r.td_recall), std::to_string(r.support)});
  }
  RenderedReport out;
  out.json = arr.dump(2) + "\n";
  out.text = format_table({"category", model_names.at(0), model_names.at(1), model_names.at(2),
                           "support"},
                          text_rows);
  return out;
}

}  // namespace debtlens
