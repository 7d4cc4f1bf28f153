#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "debtlens/bpe_tokenizer.hpp"
#include "debtlens/classifier.hpp"
#include "debtlens/onnx_graph.hpp"

namespace debtlens {

inline constexpr double kParityTolerance = 1e-3;

/// Contents of an export directory's card.json.
struct ModelCard {
  int format_version = 1;
  std::string task;  // "td", "category" or "multiclass"
  std::optional<Category> category;
  std::vector<std::string> label_order;
  std::size_t max_length = 512;
  std::string truncation = "head";
  std::string export_timestamp;
  std::vector<std::string> input_names;
  std::string output_name;

  static ModelCard parse(const std::string& json_text);
  std::size_t logits() const { return task == "multiclass" ? kCategoryCount : 1; }
};

struct ParityReport {
  std::size_t rows = 0;
  double max_abs_delta = 0;
  std::size_t worst_row = 0;
};

/// Classifier backed by an exported inference graph and its tokenizer.
class ExportedModel final : public TextClassifier {
 public:
  ExportedModel(onnx::Graph graph, ByteLevelBpeTokenizer tokenizer, ModelCard card);

  TaskKind task() const override;
  std::string name() const override { return "exported:" + target(); }
  std::string target() const override;
  std::vector<std::string> class_names() const override { return card_.label_order; }

  double score(std::string_view text) const override;
  Eigen::VectorXd score_multi(std::string_view text) const override;

  /// Raw output logits for one text.
  std::vector<double> logits(std::string_view text) const;

  const ModelCard& card() const { return card_; }
  const ByteLevelBpeTokenizer& tokenizer() const { return tokenizer_; }

 private:
  onnx::Graph graph_;
  ByteLevelBpeTokenizer tokenizer_;
  ModelCard card_;
};

/// Compares the model against a parity.jsonl file ({"text", "score"} rows for
/// binary models, {"text", "scores"} rows for multiclass models).
ParityReport check_parity(const ExportedModel& model, const std::filesystem::path& parity_file);

/// Loads an export directory (model.onnx, tokenizer.json, card.json,
/// parity.jsonl), verifies the output shape on a probe text and the parity
/// fixture within kParityTolerance. Every failure is a LoadError naming the
/// violated contract item.
std::shared_ptr<ExportedModel> load_exported_model(const std::filesystem::path& dir);

}  // namespace debtlens
