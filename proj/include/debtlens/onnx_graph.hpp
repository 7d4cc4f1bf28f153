#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace debtlens::onnx {

/// Element kinds the interpreter distinguishes. Floating types are computed
/// in double precision; integer types are held as int64.
enum class DType { Float, Int, Bool };

struct Tensor {
  DType dtype = DType::Float;
  std::vector<std::int64_t> shape;
  std::vector<double> f;        // Float
  std::vector<std::int64_t> i;  // Int, Bool

  static Tensor floats(std::vector<std::int64_t> shape, std::vector<double> data);
  static Tensor ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> data);
  static Tensor bools(std::vector<std::int64_t> shape, std::vector<std::int64_t> data);

  std::size_t numel() const;
  bool is_float() const { return dtype == DType::Float; }
  double as_double(std::size_t k) const { return is_float() ? f[k] : static_cast<double>(i[k]); }
  std::int64_t as_int(std::size_t k) const { return is_float() ? static_cast<std::int64_t>(f[k]) : i[k]; }
  std::vector<std::int64_t> int_values() const;
};

struct Attribute {
  enum class Kind { None, Float, Int, String, Tensor, Floats, Ints, Strings };
  Kind kind = Kind::None;
  double f = 0;
  std::int64_t i = 0;
  std::string s;
  std::vector<double> floats;
  std::vector<std::int64_t> ints;
  std::vector<std::string> strings;
  std::vector<::debtlens::onnx::Tensor> tensor;  // at most one element
};

struct Node {
  std::string name;
  std::string op;
  std::vector<std::string> inputs;  // "" marks an omitted optional input
  std::vector<std::string> outputs;
  std::map<std::string, Attribute> attributes;

  const Attribute* attr(const std::string& key) const;
  std::int64_t attr_int(const std::string& key, std::int64_t fallback) const;
  double attr_float(const std::string& key, double fallback) const;
};

struct ValueInfo {
  std::string name;
  std::optional<DType> dtype;
  /// Per-dimension size; nullopt for symbolic dimensions. Empty when the
  /// shape is unknown.
  std::vector<std::optional<std::int64_t>> dims;
  bool has_shape = false;
};

/// Small reference interpreter for inference graphs of the default ONNX
/// domain. Unsupported operators and externally stored tensors are rejected
/// at load time.
class Graph {
 public:
  static Graph load(const std::filesystem::path& path);
  static Graph parse(std::string_view bytes);

  const std::vector<ValueInfo>& inputs() const { return inputs_; }
  const std::vector<ValueInfo>& outputs() const { return outputs_; }
  std::int64_t opset() const { return opset_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Runs the graph and returns every graph output by name.
  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& feeds) const;

  static const std::set<std::string>& supported_ops();

 private:
  std::vector<Node> nodes_;
  std::map<std::string, Tensor> initializers_;
  std::vector<ValueInfo> inputs_;
  std::vector<ValueInfo> outputs_;
  std::int64_t opset_ = 0;
};

}  // namespace debtlens::onnx
