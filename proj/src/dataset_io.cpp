#include "debtlens/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <openssl/evp.h>

namespace debtlens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr auto kReplace = json::error_handler_t::replace;

std::string to_hex(const unsigned char* d, unsigned n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(2 * n);
  for (unsigned k = 0; k < n; ++k) {
    s.push_back(kDigits[d[k] >> 4]);
    s.push_back(kDigits[d[k] & 15]);
  }
  return s;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("io", "SHA-256 unavailable");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    return to_hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

template <typename F>
void for_each_jsonl(const fs::path& path, F&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open input file: '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
    try {
      fn(j);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

ordered_json verdict_json(const LabelVerdict& v) {
  ordered_json cats = ordered_json::array();
  for (auto c : v.categories.to_vector()) cats.push_back(category_name(c));
  ordered_json j;
  j["is_td"] = v.is_td;
  j["categories"] = cats;
  return j;
}

CategorySet categories_from(const json& arr) {
  CategorySet s;
  for (const auto& c : arr) {
    const auto name = c.get<std::string>();
    auto cat = category_from_name(name);
    if (!cat) throw ArgumentError("unknown category '" + name + "'");
    s.insert(*cat);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("io", "write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("io", "cannot move output into place: '" + path.string() + "'");
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open input file: '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open input file: '" + path.string() + "'");
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs, std::string_view extension) {
  std::vector<fs::path> out;
  for (const auto& p : inputs) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (extension.empty() ? name.front() == '.' : !name.ends_with(extension)) continue;
        if (name.ends_with(".manifest.json")) continue;
        files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::exists(p, ec)) {
      out.push_back(p);
    } else {
      throw ArgumentError("input path does not exist: '" + p.string() + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Issues

ordered_json issue_to_json(const IssueRecord& r) {
  ordered_json j;
  j["repo"] = r.repo_name;
  j["issue_id"] = r.issue_id;
  j["title"] = r.title;
  j["body"] = r.body;
  j["labels"] = r.labels;
  j["created_at"] = format_utc(r.created_at);
  j["action"] = r.action;
  return j;
}

IssueRecord issue_from_json(const json& j) {
  IssueRecord r;
  r.repo_name = j.at("repo").get<std::string>();
  r.issue_id = j.at("issue_id").get<std::int64_t>();
  r.title = j.value("title", std::string());
  r.body = j.contains("body") && j["body"].is_string() ? j["body"].get<std::string>() : std::string();
  r.labels = j.value("labels", std::vector<std::string>{});
  r.created_at = parse_utc_or_throw(j.at("created_at").get<std::string>());
  r.action = j.value("action", std::string());
  return r;
}

std::string issues_to_jsonl(const std::vector<IssueRecord>& records) {
  std::string out;
  for (const auto& r : records) out += issue_to_json(r).dump(-1, ' ', false, kReplace) + '\n';
  return out;
}

std::vector<IssueRecord> read_issues_jsonl(const fs::path& path) {
  std::vector<IssueRecord> out;
  for_each_jsonl(path, [&](const json& j) { out.push_back(issue_from_json(j)); });
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

ordered_json example_to_json(const LabeledExample& e, const std::optional<std::string>& split,
                             std::optional<int> fold) {
  ordered_json j;
  j["id"] = e.id;
  j["text"] = e.text;
  if (const bool* b = std::get_if<bool>(&e.label)) j["label"] = *b;
  else j["label"] = category_name(std::get<Category>(e.label));
  j["repo"] = e.repo_name;
  j["created_at"] = format_utc(e.created_at);
  j["split"] = split ? ordered_json(*split) : ordered_json(nullptr);
  j["fold"] = fold ? ordered_json(*fold) : ordered_json(nullptr);
  j["verdict"] = verdict_json(e.source_verdict);
  return j;
}

DatasetRow dataset_row_from_json(const json& j) {
  DatasetRow row;
  auto& e = row.example;
  e.id = j.value("id", std::string());
  e.text = j.at("text").get<std::string>();
  const auto& label = j.at("label");
  if (label.is_boolean()) {
    e.label = label.get<bool>();
  } else {
    const auto name = label.get<std::string>();
    auto cat = category_from_name(name);
    if (!cat) throw ArgumentError("unknown category label '" + name + "'");
    e.label = *cat;
  }
  e.repo_name = j.at("repo").get<std::string>();
  e.created_at = parse_utc_or_throw(j.at("created_at").get<std::string>());
  if (j.contains("verdict") && j["verdict"].is_object()) {
    e.source_verdict.is_td = j["verdict"].value("is_td", false);
    if (j["verdict"].contains("categories")) e.source_verdict.categories = categories_from(j["verdict"]["categories"]);
    e.source_verdict.is_ground_truth = e.source_verdict.is_td && !e.source_verdict.categories.empty();
  }
  if (j.contains("split") && j["split"].is_string()) {
    row.split = j["split"].get<std::string>();
    if (*row.split != "train" && *row.split != "test" && *row.split != "ood")
      throw ArgumentError("unknown split '" + *row.split + "'");
  }
  if (j.contains("fold") && j["fold"].is_number_integer()) row.fold = j["fold"].get<int>();
  return row;
}

std::string dataset_to_jsonl(const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& e : examples)
    out += example_to_json(e, std::nullopt, std::nullopt).dump(-1, ' ', false, kReplace) + '\n';
  return out;
}

std::string bundle_to_jsonl(const DatasetBundle& b) {
  std::string out;
  for (std::size_t i = 0; i < b.train.size(); ++i)
    out += example_to_json(b.train[i], "train", i < b.folds.size() ? std::optional<int>(b.folds[i]) : std::nullopt)
               .dump(-1, ' ', false, kReplace) + '\n';
  for (const auto& e : b.test) out += example_to_json(e, "test", std::nullopt).dump(-1, ' ', false, kReplace) + '\n';
  for (const auto& e : b.ood) out += example_to_json(e, "ood", std::nullopt).dump(-1, ' ', false, kReplace) + '\n';
  return out;
}

std::vector<DatasetRow> read_dataset_jsonl(const fs::path& path) {
  std::vector<DatasetRow> rows;
  for_each_jsonl(path, [&](const json& j) { rows.push_back(dataset_row_from_json(j)); });
  return rows;
}

std::vector<LabeledExample> read_dataset(const fs::path& path) {
  std::vector<LabeledExample> out;
  for (auto& r : read_dataset_jsonl(path)) out.push_back(std::move(r.example));
  return out;
}

DatasetBundle read_bundle(const fs::path& path) {
  DatasetBundle b;
  b.name = path.stem().string();
  auto rows = read_dataset_jsonl(path);
  bool seen_label = false;
  for (auto& r : rows) {
    const bool binary = std::holds_alternative<bool>(r.example.label);
    const TaskKind task = binary ? TaskKind::Binary : TaskKind::Multiclass;
    if (seen_label && task != b.task)
      throw FormatError(path.string() + ": mixes boolean and category labels");
    b.task = task;
    seen_label = true;
    if (!r.split) throw FormatError(path.string() + ": row '" + r.example.id + "' has no split; run the split stage first");
    if (*r.split == "train") {
      if (!r.fold) throw FormatError(path.string() + ": train row '" + r.example.id + "' has no fold");
      b.train.push_back(std::move(r.example));
      b.folds.push_back(*r.fold);
    } else if (*r.split == "test") {
      b.test.push_back(std::move(r.example));
    } else {
      b.ood.push_back(std::move(r.example));
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Ground truth

ordered_json ground_truth_to_json(const GroundTruthItem& g) {
  ordered_json cats = ordered_json::array();
  for (auto c : g.categories.to_vector()) cats.push_back(category_name(c));
  ordered_json j;
  j["id"] = g.id;
  j["text"] = g.text;
  j["repo"] = g.repo_name;
  j["created_at"] = format_utc(g.created_at);
  j["categories"] = cats;
  j["labels"] = g.labels;
  return j;
}

std::vector<GroundTruthItem> read_ground_truth(const fs::path& path) {
  std::vector<GroundTruthItem> out;
  for_each_jsonl(path, [&](const json& j) {
    GroundTruthItem g;
    g.id = j.value("id", std::string());
    g.text = j.at("text").get<std::string>();
    g.repo_name = j.value("repo", std::string());
    if (j.contains("created_at")) g.created_at = parse_utc_or_throw(j["created_at"].get<std::string>());
    g.categories = categories_from(j.at("categories"));
    g.labels = j.value("labels", std::vector<std::string>{});
    out.push_back(std::move(g));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

ordered_json counts_json(const std::map<std::string, std::map<std::string, std::size_t>>& counts) {
  ordered_json j = ordered_json::object();
  for (const auto& [part, classes] : counts) {
    ordered_json c = ordered_json::object();
    for (const auto& [name, n] : classes) c[name] = n;
    j[part] = c;
  }
  return j;
}

ordered_json class_counts_json(const std::vector<LabeledExample>& examples) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) ++counts[label_name(e.label)];
  ordered_json j = ordered_json::object();
  for (const auto& [name, n] : counts) j[name] = n;
  return j;
}

ordered_json file_entry(const fs::path& path, const fs::path& base) {
  ordered_json j;
  j["path"] = base.empty() ? path.generic_string() : path.lexically_relative(base).generic_string();
  j["sha256"] = sha256_file(path);
  j["bytes"] = fs::file_size(path);
  return j;
}

std::string dump(const ordered_json& j) { return j.dump(2, ' ', false, kReplace) + '\n'; }

}  // namespace debtlens
