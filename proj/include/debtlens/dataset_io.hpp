#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "debtlens/corpus.hpp"
#include "debtlens/ingest.hpp"

namespace debtlens {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Files

/// Writes `content` to a temporary sibling and renames it over `path`, so
/// readers never observe a partial file. Parent directories are created.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Expands directories to their regular files (sorted by name, optionally
/// filtered by extension); plain files are kept as given.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs,
                                                 std::string_view extension = {});

// ---------------------------------------------------------------------------
// Issue JSONL: {repo, issue_id, title, body, labels, created_at, action}

ordered_json issue_to_json(const IssueRecord& r);
IssueRecord issue_from_json(const nlohmann::json& j);

std::string issues_to_jsonl(const std::vector<IssueRecord>& records);
std::vector<IssueRecord> read_issues_jsonl(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset JSONL: {id, text, label, repo, created_at, split, fold, verdict}
// `label` is a boolean for binary datasets and a category name otherwise;
// `split` is null before splitting, `fold` is null outside the train split.

struct DatasetRow {
  LabeledExample example;
  std::optional<std::string> split;
  std::optional<int> fold;
};

ordered_json example_to_json(const LabeledExample& e, const std::optional<std::string>& split,
                             std::optional<int> fold);
DatasetRow dataset_row_from_json(const nlohmann::json& j);

std::string dataset_to_jsonl(const std::vector<LabeledExample>& examples);
std::string bundle_to_jsonl(const DatasetBundle& bundle);

std::vector<DatasetRow> read_dataset_jsonl(const std::filesystem::path& path);
/// Examples of a dataset file, ignoring any split columns.
std::vector<LabeledExample> read_dataset(const std::filesystem::path& path);
/// Rebuilds a bundle from its JSONL; the name is the file stem and the task
/// follows from the label type.
DatasetBundle read_bundle(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ground truth JSONL: {id, text, repo, created_at, categories, labels}

struct GroundTruthItem {
  std::string id;
  std::string text;
  std::string repo_name;
  UtcTime created_at{};
  CategorySet categories;
  std::vector<std::string> labels;
};

ordered_json ground_truth_to_json(const GroundTruthItem& g);
std::vector<GroundTruthItem> read_ground_truth(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifests

/// Per-partition class counts as JSON, keys in a stable order.
ordered_json counts_json(const std::map<std::string, std::map<std::string, std::size_t>>& counts);
ordered_json class_counts_json(const std::vector<LabeledExample>& examples);

/// {"path", "sha256", "bytes"} for an existing file.
ordered_json file_entry(const std::filesystem::path& path, const std::filesystem::path& base = {});

/// Pretty-printed JSON with a trailing newline.
std::string dump(const ordered_json& j);

}  // namespace debtlens
