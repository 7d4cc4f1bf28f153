#include <doctest/doctest.h>

#include <cmath>
#include <random>

#include "debtlens/baseline.hpp"
#include "helpers.hpp"

using namespace debtlens;
using doctest::Approx;

namespace {

using LD = long double;

SparseRows<LD> random_sparse(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Eigen::Triplet<LD, std::ptrdiff_t>> t;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (u(rng) > 0.3) t.emplace_back(i, j, static_cast<LD>(u(rng)));
  SparseRows<LD> x(rows, cols);
  x.setFromTriplets(t.begin(), t.end());
  return x;
}

VectorX<LD> random_vec(int n, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorX<LD> v(n);
  for (int i = 0; i < n; ++i) v[i] = static_cast<LD>(u(rng));
  return v;
}

}  // namespace

TEST_CASE("logistic gradient matches central differences") {
  std::mt19937_64 rng(1);
  const auto x = random_sparse(12, 7, rng);
  VectorX<LD> y(12);
  for (int i = 0; i < 12; ++i) y[i] = i % 3 == 0 ? 1 : 0;
  const auto s = random_vec(12, rng, 0.5, 2);
  const auto w = random_vec(7, rng);
  const LD b = 0.3L;
  VectorX<LD> gw;
  LD gb;
  weighted_logistic_gradient(x, y, s, w, b, gw, gb);
  const LD h = 1e-6L;
  for (int j = 0; j < 7; ++j) {
    auto wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    const LD fd = (weighted_logistic_loss(x, y, s, wp, b) - weighted_logistic_loss(x, y, s, wm, b)) / (2 * h);
    CHECK(static_cast<double>(std::fabs(fd - gw[j])) < 1e-8);
  }
  const LD fdb = (weighted_logistic_loss(x, y, s, w, b + h) - weighted_logistic_loss(x, y, s, w, b - h)) / (2 * h);
  CHECK(static_cast<double>(std::fabs(fdb - gb)) < 1e-8);
}

TEST_CASE("softmax gradient matches central differences") {
  std::mt19937_64 rng(2);
  const int n = 10, d = 5, k = 4;
  const auto x = random_sparse(n, d, rng);
  std::vector<std::size_t> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = static_cast<std::size_t>(i % k);
  const auto s = random_vec(n, rng, 0.5, 2);
  MatrixX<LD> w(d, k);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) w(i, j) = random_vec(1, rng)[0];
  const auto b = random_vec(k, rng);
  MatrixX<LD> gw;
  VectorX<LD> gb;
  weighted_softmax_gradient<LD>(x, labels, s, w, b, gw, gb);
  const LD h = 1e-6L;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) {
      auto wp = w, wm = w;
      wp(i, j) += h;
      wm(i, j) -= h;
      const LD fd = (weighted_softmax_loss<LD>(x, labels, s, wp, b) - weighted_softmax_loss<LD>(x, labels, s, wm, b)) / (2 * h);
      CHECK(static_cast<double>(std::fabs(fd - gw(i, j))) < 1e-8);
    }
  for (int j = 0; j < k; ++j) {
    auto bp = b, bm = b;
    bp[j] += h;
    bm[j] -= h;
    const LD fd = (weighted_softmax_loss<LD>(x, labels, s, w, bp) - weighted_softmax_loss<LD>(x, labels, s, w, bm)) / (2 * h);
    CHECK(static_cast<double>(std::fabs(fd - gb[j])) < 1e-8);
  }
}

TEST_CASE("stable sigmoid and softplus at extremes") {
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(softplus(800.0) == Approx(800.0));
  CHECK(softplus(-800.0) == 0.0);
  CHECK(softplus(0.0) == Approx(std::log(2.0)));
}

TEST_CASE("inverse_frequency_weights") {
  const std::vector<std::size_t> counts = {10, 30};
  const auto w = inverse_frequency_weights(counts);
  CHECK(w[0] == Approx(2.0));
  CHECK(w[1] == Approx(40.0 / 60.0));
  const std::vector<std::size_t> bad = {0, 3};
  CHECK_THROWS(inverse_frequency_weights(bad));
}

TEST_CASE("featurize hashes tokens into normalised rows") {
  CHECK(feature_tokens("Hello, wörld 42x!") == std::vector<std::string>{"Hello", "wörld", "42x"});
  const std::vector<std::string> texts = {"a b a", ""};
  const auto x = featurize(texts, 1024);
  CHECK(x.rows() == 2);
  CHECK(x.cols() == 1024);
  CHECK(x.row(0).norm() == Approx(1.0));
  CHECK(x.row(1).nonZeros() == 0);
  CHECK(feature_bucket("a", 1024) == fnv1a64("a") % 1024);
}

TEST_CASE("binary baseline learns a separable problem and round-trips") {
  std::vector<std::string> texts;
  std::vector<bool> labels;
  std::vector<int> folds;
  for (int i = 0; i < 200; ++i) {
    const bool pos = i % 2 == 0;
    texts.push_back(std::string(pos ? "legacy hack workaround " : "feature request idea ") + std::to_string(i));
    labels.push_back(pos);
    folds.push_back(i % 5);
  }
  TrainOptions opt;
  opt.epochs = 50;
  opt.dim = 1 << 12;
  auto res = train_logistic(texts, labels, folds, opt);
  CHECK(res.fold_reports.size() == 5);
  for (const auto& r : res.fold_reports) CHECK(r.mcc > 0.9);
  CHECK(res.model.predict("legacy hack workaround again"));
  CHECK_FALSE(res.model.predict("feature request idea again"));
  const auto& trace = res.model.loss_trace();
  CHECK(trace.back() < trace.front());

  testing::TempDir tmp;
  res.model.save(tmp / "td.model");
  const auto back = BaselineModel::load(tmp / "td.model");
  CHECK(back.score("legacy hack") == res.model.score("legacy hack"));
  CHECK(back.dim() == res.model.dim());
  CHECK(load_classifier(tmp / "td.model")->target() == "td");

  testing::TempDir bad;
  std::ofstream(bad / "x.model") << "not a model";
  CHECK_THROWS_AS(BaselineModel::load(bad / "x.model"), LoadError);
  CHECK_THROWS_AS(BaselineModel::load(bad / "missing.model"), LoadError);
}

TEST_CASE("softmax baseline yields probability vectors") {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  const char* words[] = {"alpha", "beta", "gamma"};
  for (int i = 0; i < 90; ++i) {
    texts.push_back(std::string(words[i % 3]) + " item " + std::to_string(i));
    labels.push_back(static_cast<std::size_t>(i % 3));
  }
  TrainOptions opt;
  opt.epochs = 50;
  opt.dim = 1 << 12;
  auto res = train_softmax(texts, labels, {"a", "b", "c"}, {}, opt);
  const auto p = res.model.score_multi("gamma item");
  CHECK(p.size() == 3);
  CHECK(p.sum() == Approx(1.0));
  CHECK(res.model.predict_class("gamma item") == 2);
  CHECK(res.model.predict_class("alpha item") == 0);
}

TEST_CASE("ensemble_combine truth table") {
  const std::map<Category, double> cats = {{Category::Code, 0.9}, {Category::Test, 0.1}};
  auto v = ensemble_combine(0.8, cats);
  CHECK(v.is_td);
  CHECK(v.typed_debt.to_vector() == std::vector<Category>{Category::Code});
  v = ensemble_combine(0.2, cats);
  CHECK_FALSE(v.is_td);
  CHECK(v.typed_debt.empty());
  CHECK(*v.category_scores[index_of(Category::Code)] == 0.9);
  CHECK_FALSE(v.category_scores[index_of(Category::Build)]);
  CHECK(ensemble_combine(0.5, {{Category::Build, 0.5}}).typed_debt.contains(Category::Build));
}
