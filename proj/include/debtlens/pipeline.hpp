#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "debtlens/baseline.hpp"
#include "debtlens/classifier.hpp"
#include "debtlens/corpus.hpp"
#include "debtlens/dataset_io.hpp"
#include "debtlens/ingest.hpp"
#include "debtlens/labeling.hpp"

namespace debtlens {

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Effective configuration of one stage run; recorded verbatim in its manifest.
struct RunConfig {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  std::uint64_t seed = kDefaultSeed;
  double ratio = 0.85;
  int k = 5;
  int epochs = 5;
  double learning_rate = 0.5;
  double threshold = kDefaultThreshold;
  std::size_t ood_top_n = 1;
  std::size_t min_len = kDefaultMinTextLength;
  std::optional<UtcTime> cutoff;
  std::optional<UtcTime> start;
  std::optional<UtcTime> end;
  std::vector<std::string> categories;  // dataset-name filter: "td", "multiclass", category names
  std::vector<std::filesystem::path> model_dirs;
  std::uint32_t feature_dim = kDefaultFeatureDim;

  ordered_json to_json() const;
  /// True when no filter is set or `dataset` is named by one (case-insensitive).
  bool selects(std::string_view dataset) const;
};

struct StageResult {
  std::filesystem::path manifest;
  ordered_json summary;
};

// ---------------------------------------------------------------------------
// Pure building blocks

/// One record per issue key, in order of first appearance. Labels are the
/// union over all events of the issue; text fields come from its last event.
std::vector<IssueRecord> collapse_events(const std::vector<IssueRecord>& events);

struct CuratedDataset {
  std::string name;  // "td", a category name, or "multiclass"
  std::vector<LabeledExample> examples;
  ordered_json counts;  // pre-/post-cleaning and balanced counts
};

struct CurationOutput {
  std::vector<CuratedDataset> datasets;
  std::vector<GroundTruthItem> ground_truth;
  std::vector<std::string> warnings;
  ordered_json stats;
};

/// Labels, cleans, deduplicates and balances collapsed issue records into the
/// TD dataset, one binary dataset per category and the multiclass dataset.
CurationOutput curate_records(const std::vector<IssueRecord>& issues, const RunConfig& config,
                              const LabelRuleSet& rules = LabelRuleSet::standard());

/// Models found in a directory: `<name>.model` baseline files or `<name>/`
/// export directories named "td", "multiclass" or after a category.
struct ModelSet {
  std::shared_ptr<TextClassifier> td;
  std::shared_ptr<TextClassifier> multiclass;
  std::map<Category, std::shared_ptr<TextClassifier>> categories;
};

ModelSet discover_models(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Stages. Each writes its artifacts atomically under `config.out` together
// with a `<stage>.manifest.json` holding the config, seed, rule-set version
// and input/output digests.

StageResult run_mine(const RunConfig& config);
StageResult run_curate(const RunConfig& config);
StageResult run_split(const RunConfig& config);
StageResult run_train_baseline(const RunConfig& config);
StageResult run_evaluate(const RunConfig& config);
StageResult run_ensemble(const RunConfig& config);
StageResult run_ground_truth_eval(const RunConfig& config);

}  // namespace debtlens
