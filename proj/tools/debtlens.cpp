#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI/CLI11.hpp>
#include <nlohmann/json.hpp>

#include "debtlens/log.hpp"
#include "debtlens/pipeline.hpp"

namespace {

using namespace debtlens;

int report_error(const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << std::endl;
  return kind == "argument" ? 2 : 1;
}

struct Flags {
  std::vector<std::string> inputs;
  std::string out;
  std::uint64_t seed = kDefaultSeed;
  double ratio = 0.85;
  int k = 5;
  int epochs = 5;
  double learning_rate = 0.5;
  double threshold = kDefaultThreshold;
  std::size_t ood_top_n = 1;
  std::size_t min_len = kDefaultMinTextLength;
  std::string cutoff, start, end;
  std::vector<std::string> categories;
  std::vector<std::string> model_dirs;
  std::uint32_t feature_dim = kDefaultFeatureDim;

  RunConfig to_config() const {
    RunConfig c;
    for (const auto& i : inputs) c.inputs.emplace_back(i);
    c.out = out;
    c.seed = seed;
    c.ratio = ratio;
    c.k = k;
    c.epochs = epochs;
    c.learning_rate = learning_rate;
    c.threshold = threshold;
    c.ood_top_n = ood_top_n;
    c.min_len = min_len;
    if (!cutoff.empty()) c.cutoff = parse_utc_or_throw(cutoff);
    if (!start.empty()) c.start = parse_utc_or_throw(start);
    if (!end.empty()) c.end = parse_utc_or_throw(end);
    c.categories = categories;
    for (const auto& m : model_dirs) c.model_dirs.emplace_back(m);
    c.feature_dim = feature_dim;
    if (!(ratio > 0 && ratio < 1)) throw ArgumentError("--ratio must lie in (0, 1)");
    if (k < 2) throw ArgumentError("--k must be at least 2");
    if (epochs < 0) throw ArgumentError("--epochs must be non-negative");
    if (!(threshold >= 0 && threshold <= 1)) throw ArgumentError("--threshold must lie in [0, 1]");
    if (feature_dim == 0) throw ArgumentError("--feature-dim must be positive");
    return c;
  }
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--input,-i", f.inputs, "Input files or directories")->required();
  app->add_option("--out,-o", f.out, "Output directory")->required();
  app->add_option("--seed", f.seed, "Root seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  log::init();
  CLI::App app{"Technical-debt issue mining, curation and classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  Flags f;
  std::map<CLI::App*, std::function<StageResult(const RunConfig&)>> stages;

  auto* mine = app.add_subcommand("mine", "Archives -> issue JSONL");
  add_common(mine, f);
  mine->add_option("--start", f.start, "Keep issues created at or after this instant");
  mine->add_option("--end", f.end, "Keep issues created before this instant");
  stages[mine] = run_mine;

  auto* curate = app.add_subcommand("curate", "Issues -> labelled, cleaned, balanced datasets + ground truth");
  add_common(curate, f);
  curate->add_option("--min-len", f.min_len, "Minimum cleaned text length")->capture_default_str();
  curate->add_option("--category", f.categories, "Restrict to these datasets (td, multiclass, category names)");
  stages[curate] = run_curate;

  auto* split = app.add_subcommand("split", "Datasets -> bundles with OOD, temporal and fold assignments");
  add_common(split, f);
  split->add_option("--ratio", f.ratio, "Train fraction")->capture_default_str();
  split->add_option("--k", f.k, "Cross-validation folds")->capture_default_str();
  split->add_option("--ood-top-n", f.ood_top_n, "Repositories withheld as OOD")->capture_default_str();
  split->add_option("--cutoff", f.cutoff, "Also write temporal bundles split at this instant");
  split->add_option("--category", f.categories, "Restrict to these datasets");
  stages[split] = run_split;

  auto* train = app.add_subcommand("train-baseline", "Bundle -> baseline model + CV metrics");
  add_common(train, f);
  train->add_option("--epochs", f.epochs, "Gradient steps")->capture_default_str();
  train->add_option("--learning-rate", f.learning_rate, "Gradient step size")->capture_default_str();
  train->add_option("--threshold", f.threshold, "Decision threshold")->capture_default_str();
  train->add_option("--feature-dim", f.feature_dim, "Hashed feature dimension")->capture_default_str();
  train->add_option("--category", f.categories, "Restrict to these bundles");
  stages[train] = run_train_baseline;

  auto* evaluate = app.add_subcommand("evaluate", "Models + bundle splits -> evaluation reports");
  add_common(evaluate, f);
  evaluate->add_option("--model-dir", f.model_dirs, "Model file, export directory, or directory of models")->required();
  evaluate->add_option("--threshold", f.threshold, "Decision threshold")->capture_default_str();
  evaluate->add_option("--category", f.categories, "Restrict to these bundles");
  stages[evaluate] = run_evaluate;

  auto* ensemble = app.add_subcommand("ensemble", "TD + per-category models + texts -> verdicts");
  add_common(ensemble, f);
  ensemble->add_option("--model-dir", f.model_dirs, "Directory holding td and category models")->required();
  ensemble->add_option("--threshold", f.threshold, "Decision threshold")->capture_default_str();
  stages[ensemble] = run_ensemble;

  auto* gt = app.add_subcommand("ground-truth-eval", "Models + ground truth -> per-category recall table");
  add_common(gt, f);
  gt->add_option("--model-dir", f.model_dirs, "Directory holding multiclass, category and td models")->required();
  gt->add_option("--threshold", f.threshold, "Decision threshold")->capture_default_str();
  stages[gt] = run_ground_truth_eval;

  auto* rules = app.add_subcommand("rules", "Print the label rule set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("argument", e.what());
  }

  try {
    if (rules->parsed()) {
      std::cout << LabelRuleSet::standard().to_json();
      return 0;
    }
    for (auto& [sub, fn] : stages) {
      if (!sub->parsed()) continue;
      const auto result = fn(f.to_config());
      nlohmann::json j;
      j["manifest"] = result.manifest.generic_string();
      std::cout << j.dump() << std::endl;
      return 0;
    }
    return report_error("argument", "no subcommand given");
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
}
