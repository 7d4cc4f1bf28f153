#include "debtlens/exported_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace debtlens {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::vector<std::int64_t>& v) {
  std::string s = "[";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + std::to_string(v[k]);
  return s + "]";
}

}  // namespace

ModelCard ModelCard::parse(const std::string& json_text) {
  using nlohmann::json;
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw LoadError("card.json: not a JSON object");
  ModelCard c;
  try {
    c.format_version = j.value("format_version", 1);
    if (c.format_version != 1)
      throw LoadError("card.json: unsupported format_version " + std::to_string(c.format_version));
    c.task = j.at("task").get<std::string>();
    if (c.task != "td" && c.task != "category" && c.task != "multiclass")
      throw LoadError("card.json: unknown task '" + c.task + "'");
    if (c.task == "category") {
      const auto& cat = j.at("category");
      if (!cat.is_string()) throw LoadError("card.json: task 'category' requires a category name");
      c.category = category_from_name(cat.get<std::string>());
      if (!c.category) throw LoadError("card.json: unknown category '" + cat.get<std::string>() + "'");
    }
    c.label_order = j.at("label_order").get<std::vector<std::string>>();
    const std::size_t want = c.task == "multiclass" ? kCategoryCount : 2;
    if (c.label_order.size() != want)
      throw LoadError("card.json: label_order has " + std::to_string(c.label_order.size()) +
                      " entries, expected " + std::to_string(want));
    c.max_length = j.value("max_length", std::size_t{512});
    c.truncation = j.value("truncation", std::string("head"));
    if (c.truncation != "head") throw LoadError("card.json: unsupported truncation '" + c.truncation + "'");
    c.export_timestamp = j.value("export_timestamp", std::string());
    c.input_names = j.value("input_names", std::vector<std::string>{"input_ids", "attention_mask"});
    c.output_name = j.value("output_name", std::string("logits"));
  } catch (const json::exception& e) {
    throw LoadError(std::string("card.json: ") + e.what());
  }
  if (c.input_names.empty() || c.input_names.front() != "input_ids")
    throw LoadError("card.json: first input must be 'input_ids'");
  return c;
}

ExportedModel::ExportedModel(onnx::Graph graph, ByteLevelBpeTokenizer tokenizer, ModelCard card)
    : graph_(std::move(graph)), tokenizer_(std::move(tokenizer)), card_(std::move(card)) {
  // Graph inputs must be exactly the card's input names.
  for (const auto& name : card_.input_names) {
    bool found = false;
    for (const auto& in : graph_.inputs()) found |= in.name == name;
    if (!found) throw LoadError("graph input mismatch: card input '" + name + "' is not a graph input");
  }
  for (const auto& in : graph_.inputs()) {
    bool found = false;
    for (const auto& name : card_.input_names) found |= in.name == name;
    if (!found) throw LoadError("graph input mismatch: unexpected graph input '" + in.name + "'");
    if (in.dtype && *in.dtype == onnx::DType::Float)
      throw LoadError("graph input mismatch: '" + in.name + "' must be an integer tensor");
  }
  const onnx::ValueInfo* out = nullptr;
  for (const auto& o : graph_.outputs())
    if (o.name == card_.output_name) out = &o;
  if (out == nullptr) throw LoadError("graph output mismatch: no output named '" + card_.output_name + "'");
  if (out->has_shape && !out->dims.empty() && out->dims.back() &&
      static_cast<std::size_t>(*out->dims.back()) != card_.logits())
    throw LoadError("shape mismatch: graph declares " + std::to_string(*out->dims.back()) +
                    " logits, card task '" + card_.task + "' needs " + std::to_string(card_.logits()));
}

TaskKind ExportedModel::task() const {
  return card_.task == "multiclass" ? TaskKind::Multiclass : TaskKind::Binary;
}

std::string ExportedModel::target() const {
  if (card_.task == "category") return std::string(category_name(*card_.category));
  return card_.task;
}

std::vector<double> ExportedModel::logits(std::string_view text) const {
  const auto ids = tokenizer_.encode(text, card_.max_length);
  const auto len = static_cast<std::int64_t>(ids.size());
  std::map<std::string, onnx::Tensor> feeds;
  for (const auto& in : graph_.inputs()) {
    if (in.name == "input_ids") feeds[in.name] = onnx::Tensor::ints({1, len}, ids);
    else if (in.name == "attention_mask")
      feeds[in.name] = onnx::Tensor::ints({1, len}, std::vector<std::int64_t>(ids.size(), 1));
    else if (in.name == "token_type_ids")
      feeds[in.name] = onnx::Tensor::ints({1, len}, std::vector<std::int64_t>(ids.size(), 0));
    else throw LoadError("graph input mismatch: cannot feed input '" + in.name + "'");
  }
  const auto outputs = graph_.run(feeds);
  const onnx::Tensor& y = outputs.at(card_.output_name);
  const std::vector<std::int64_t> want{1, static_cast<std::int64_t>(card_.logits())};
  if (y.shape != want)
    throw LoadError("shape mismatch: output '" + card_.output_name + "' has shape " + join(y.shape) +
                    ", expected " + join(want));
  std::vector<double> v(y.numel());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = y.as_double(k);
  return v;
}

double ExportedModel::score(std::string_view text) const {
  if (task() != TaskKind::Binary) return TextClassifier::score(text);
  const double z = logits(text).at(0);
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Eigen::VectorXd ExportedModel::score_multi(std::string_view text) const {
  if (task() == TaskKind::Binary) return TextClassifier::score_multi(text);
  const auto z = logits(text);
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  p = (p.array() - p.maxCoeff()).exp();
  return p / p.sum();
}

ParityReport check_parity(const ExportedModel& model, const std::filesystem::path& parity_file) {
  std::ifstream in(parity_file);
  if (!in) throw LoadError("missing parity fixture: '" + parity_file.string() + "'");
  ParityReport r;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string())
      throw LoadError("parity fixture line " + std::to_string(lineno) + " is malformed");
    const auto text = j["text"].get<std::string>();
    std::vector<double> expected, actual;
    try {
      if (model.task() == TaskKind::Binary) {
        expected.push_back(j.at("score").get<double>());
        actual.push_back(model.score(text));
      } else {
        expected = j.at("scores").get<std::vector<double>>();
        const Eigen::VectorXd p = model.score_multi(text);
        actual.assign(p.data(), p.data() + p.size());
      }
    } catch (const nlohmann::json::exception&) {
      throw LoadError("parity fixture line " + std::to_string(lineno) + " lacks reference scores");
    }
    if (expected.size() != actual.size())
      throw LoadError("parity fixture line " + std::to_string(lineno) + " has " +
                      std::to_string(expected.size()) + " scores, model produces " +
                      std::to_string(actual.size()));
    for (std::size_t k = 0; k < actual.size(); ++k) {
      const double d = std::fabs(actual[k] - expected[k]);
      if (!(d <= r.max_abs_delta)) {
        r.max_abs_delta = std::isnan(d) ? INFINITY : d;
        r.worst_row = r.rows;
      }
    }
    ++r.rows;
  }
  if (r.rows == 0) throw LoadError("parity fixture is empty");
  return r;
}

std::shared_ptr<ExportedModel> load_exported_model(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw LoadError("export directory not found: '" + dir.string() + "'");
  const fs::path graph_file = dir / "model.onnx", tok_file = dir / "tokenizer.json",
                 card_file = dir / "card.json", parity_file = dir / "parity.jsonl";
  if (!fs::exists(graph_file)) throw LoadError("missing inference graph: '" + graph_file.string() + "'");
  if (!fs::exists(tok_file)) throw LoadError("missing tokenizer config: '" + tok_file.string() + "'");
  if (!fs::exists(card_file)) throw LoadError("missing model card: '" + card_file.string() + "'");
  if (!fs::exists(parity_file)) throw LoadError("missing parity fixture: '" + parity_file.string() + "'");

  auto card = ModelCard::parse(read_file(card_file));
  auto graph = onnx::Graph::load(graph_file);
  auto tokenizer = ByteLevelBpeTokenizer::from_file(tok_file);
  auto model = std::make_shared<ExportedModel>(std::move(graph), std::move(tokenizer), std::move(card));

  // Probe run validates the output shape before the parity check.
  model->logits("probe");
  const ParityReport parity = check_parity(*model, parity_file);
  if (parity.max_abs_delta > kParityTolerance) {
    std::ostringstream msg;
    msg << "parity check failed: max |delta score| = " << parity.max_abs_delta << " at row "
        << parity.worst_row << " exceeds " << kParityTolerance;
    throw LoadError(msg.str());
  }
  return model;
}

}  // namespace debtlens
