#include "debtlens/pipeline.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <set>
#include <thread>
#include <unordered_map>

#include "debtlens/exported_model.hpp"
#include "debtlens/log.hpp"
#include "debtlens/metrics.hpp"

namespace debtlens {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string stem_of(const fs::path& p) {
  auto s = p.filename().string();
  for (std::string_view ext : {".jsonl", ".model"})
    if (s.ends_with(ext)) return s.substr(0, s.size() - ext.size());
  return p.stem().string();
}

class Warnings {
 public:
  void add(std::string message) {
    log::warn(message);
    items_.push_back(std::move(message));
  }
  const std::vector<std::string>& items() const { return items_; }
  ordered_json json() const { return ordered_json(items_); }

 private:
  std::vector<std::string> items_;
};

ordered_json base_manifest(std::string_view stage, const RunConfig& config,
                           const std::vector<fs::path>& inputs) {
  ordered_json m;
  m["tool"] = "debtlens";
  m["version"] = kToolVersion;
  m["stage"] = stage;
  m["seed"] = config.seed;
  m["rule_set_version"] = LabelRuleSet::standard().version();
  m["config"] = config.to_json();
  ordered_json ins = ordered_json::array();
  for (const auto& p : inputs) ins.push_back(file_entry(p));
  m["inputs"] = ins;
  return m;
}

StageResult finish(const RunConfig& config, std::string_view stage, ordered_json manifest,
                   const std::vector<fs::path>& outputs, ordered_json summary, const Warnings& warnings) {
  ordered_json outs = ordered_json::array();
  for (const auto& p : outputs) outs.push_back(file_entry(p, config.out));
  manifest["outputs"] = outs;
  manifest["summary"] = summary;
  manifest["warnings"] = warnings.json();
  const fs::path path = config.out / (std::string(stage) + ".manifest.json");
  atomic_write(path, dump(manifest));
  log::info(std::string(stage) + ": wrote " + path.string());
  return {path, std::move(summary)};
}

void require_inputs(const RunConfig& config, std::string_view stage) {
  if (config.inputs.empty()) throw ArgumentError(std::string(stage) + ": --input is required");
  if (config.out.empty()) throw ArgumentError(std::string(stage) + ": --out is required");
}

/// JSONL inputs; a directory holding the upstream stage's `subdir` stands for that subdirectory.
std::vector<fs::path> stage_inputs(const RunConfig& config, const char* subdir) {
  std::vector<fs::path> paths;
  for (const auto& p : config.inputs) {
    std::error_code ec;
    paths.push_back(fs::is_directory(p / subdir, ec) ? p / subdir : p);
  }
  return expand_inputs(paths, ".jsonl");
}

std::vector<LabeledExample> clean_all(const std::vector<ClassifiedRecord>& records, ExampleLabel label,
                                      const CleanOptions& opts, std::size_t& rejected) {
  std::vector<LabeledExample> out;
  for (const auto& r : records) {
    if (auto e = make_example(r, label, opts)) out.push_back(std::move(*e));
    else ++rejected;
  }
  return out;
}

// Cleaned, deduplicated pool plus its counts at each step.
struct Pool {
  std::vector<LabeledExample> examples;
  ordered_json counts;
};

Pool make_pool(const std::vector<ClassifiedRecord>& records, ExampleLabel label, const CleanOptions& opts) {
  std::size_t rejected = 0;
  auto cleaned = clean_all(records, label, opts, rejected);
  Pool p;
  p.counts["records"] = records.size();
  p.counts["rejected_by_cleaning"] = rejected;
  p.counts["cleaned"] = cleaned.size();
  p.examples = deduplicate(cleaned);
  p.counts["unique"] = p.examples.size();
  return p;
}

std::vector<LabeledExample> without_texts(const std::vector<LabeledExample>& pool,
                                          const std::vector<LabeledExample>& exclude) {
  std::set<std::string_view> texts;
  for (const auto& e : exclude) texts.insert(e.text);
  std::vector<LabeledExample> out;
  for (const auto& e : pool)
    if (!texts.count(e.text)) out.push_back(e);
  return out;
}

std::shared_ptr<TextClassifier> load_with_threshold(const fs::path& p, double threshold) {
  auto m = load_classifier(p);
  m->set_threshold(threshold);
  return m;
}

// A model path given for a bundle: a baseline file, an export directory, or a
// directory holding `<bundle>.model` / `<bundle>/`.
fs::path resolve_model(const fs::path& given, const std::string& bundle) {
  std::error_code ec;
  if (!fs::exists(given, ec)) throw LoadError("model path does not exist: '" + given.string() + "'");
  if (!fs::is_directory(given, ec) || fs::exists(given / "model.onnx", ec)) return given;
  for (const fs::path& cand : {given / (bundle + ".model"), given / bundle})
    if (fs::exists(cand, ec)) return cand;
  throw LoadError("no model for bundle '" + bundle + "' under '" + given.string() + "'");
}

// Index of each example's category in the model's output order.
std::vector<std::size_t> truth_indices(const std::vector<LabeledExample>& part,
                                       const std::vector<std::string>& model_classes) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t k = 0; k < model_classes.size(); ++k) pos[lower(model_classes[k])] = k;
  std::vector<std::size_t> out;
  for (const auto& e : part) {
    auto it = pos.find(lower(label_name(e.label)));
    if (it == pos.end())
      throw ArgumentError("model has no output for class '" + label_name(e.label) + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

ordered_json RunConfig::to_json() const {
  auto opt_time = [](const std::optional<UtcTime>& t) {
    return t ? ordered_json(format_utc(*t)) : ordered_json(nullptr);
  };
  ordered_json j;
  ordered_json ins = ordered_json::array();
  for (const auto& p : inputs) ins.push_back(p.generic_string());
  j["inputs"] = ins;
  j["out"] = out.generic_string();
  j["seed"] = seed;
  j["ratio"] = ratio;
  j["k"] = k;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["threshold"] = threshold;
  j["ood_top_n"] = ood_top_n;
  j["min_len"] = min_len;
  j["cutoff"] = opt_time(cutoff);
  j["start"] = opt_time(start);
  j["end"] = opt_time(end);
  j["categories"] = categories;
  ordered_json models = ordered_json::array();
  for (const auto& p : model_dirs) models.push_back(p.generic_string());
  j["model_dirs"] = models;
  j["feature_dim"] = feature_dim;
  return j;
}

bool RunConfig::selects(std::string_view dataset) const {
  if (categories.empty()) return true;
  const auto want = lower(dataset);
  return std::any_of(categories.begin(), categories.end(),
                     [&](const std::string& c) { return lower(c) == want; });
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<IssueRecord> collapse_events(const std::vector<IssueRecord>& events) {
  std::vector<IssueRecord> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& e : events) {
    auto [it, fresh] = index.try_emplace(e.key(), out.size());
    if (fresh) {
      out.push_back(e);
      continue;
    }
    IssueRecord& r = out[it->second];
    std::vector<std::string> labels = r.labels;
    for (const auto& l : e.labels)
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    r = e;
    r.labels = std::move(labels);
  }
  return out;
}

CurationOutput curate_records(const std::vector<IssueRecord>& issues, const RunConfig& config,
                              const LabelRuleSet& rules) {
  CurationOutput out;
  Warnings warnings;
  const CleanOptions opts{config.min_len, {}};
  const auto part = partition_by_verdict(issues, rules);

  out.stats["issues"] = issues.size();
  out.stats["td_positive_records"] = part.td_positives.size();
  out.stats["ground_truth_records"] = part.ground_truth.size();
  out.stats["residual_records"] = part.residual.size();
  ordered_json per_cat = ordered_json::object();
  for (auto c : kAllCategories)
    per_cat[std::string(category_name(c))] = part.category_positives[index_of(c)].size();
  out.stats["category_positive_records"] = per_cat;

  std::set<std::string> gt_ids;
  for (const auto& r : part.ground_truth) {
    GroundTruthItem g;
    g.id = r.record.key();
    g.text = normalize_text(r.record.title + " " + r.record.body);
    g.repo_name = r.record.repo_name;
    g.created_at = r.record.created_at;
    g.categories = r.verdict.categories;
    g.labels = r.record.labels;
    gt_ids.insert(g.id);
    out.ground_truth.push_back(std::move(g));
  }

  const Pool negatives = make_pool(part.residual, false, opts);
  out.stats["negative_pool"] = negatives.counts;

  auto finish_binary = [&](const std::string& name, const Pool& positives) {
    const auto neg = without_texts(negatives.examples, positives.examples);
    if (positives.examples.empty()) {
      warnings.add("dataset '" + name + "' skipped: no positives after cleaning");
      return;
    }
    if (neg.empty()) {
      warnings.add("dataset '" + name + "' skipped: negative pool is empty");
      return;
    }
    auto balanced = build_balanced_dataset(positives.examples, neg, derive_seed(config.seed, "balance/" + name));
    if (balanced.warning) warnings.add("dataset '" + name + "': " + *balanced.warning);
    auto purged = purge_ground_truth(balanced.examples, gt_ids);
    CuratedDataset d;
    d.name = name;
    d.counts["positives"] = positives.counts;
    d.counts["negative_candidates"] = neg.size();
    d.counts["per_class"] = balanced.per_class;
    d.counts["ground_truth_purged"] = purged.removed;
    d.examples = std::move(purged.examples);
    d.counts["classes"] = class_counts_json(d.examples);
    out.datasets.push_back(std::move(d));
  };

  if (config.selects("td")) {
    const Pool td = make_pool(part.td_positives, true, opts);
    if (td.examples.empty()) throw CurationError("TD dataset: no positives survive cleaning");
    finish_binary("td", td);
  }

  std::array<std::vector<LabeledExample>, kCategoryCount> multi;
  bool multi_complete = true;
  for (auto c : kAllCategories) {
    const std::string name(category_name(c));
    const auto& records = part.category_positives[index_of(c)];
    if (config.selects(name)) finish_binary(name, make_pool(records, true, opts));
    if (config.selects("multiclass")) {
      multi[index_of(c)] = make_pool(records, c, opts).examples;
      multi_complete = multi_complete && !multi[index_of(c)].empty();
    }
  }
  if (config.selects("multiclass")) {
    if (!multi_complete) {
      std::string missing;
      for (auto c : kAllCategories)
        if (multi[index_of(c)].empty()) missing += (missing.empty() ? "" : ", ") + std::string(category_name(c));
      warnings.add("dataset 'multiclass' skipped: no positives for " + missing);
    } else {
      CuratedDataset d;
      d.name = "multiclass";
      auto purged = purge_ground_truth(build_multiclass_dataset(multi, derive_seed(config.seed, "multiclass")), gt_ids);
      d.counts["ground_truth_purged"] = purged.removed;
      d.examples = std::move(purged.examples);
      d.counts["classes"] = class_counts_json(d.examples);
      out.datasets.push_back(std::move(d));
    }
  }
  out.warnings = warnings.items();
  return out;
}

ModelSet discover_models(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw LoadError("model directory does not exist: '" + dir.string() + "'");
  ModelSet set;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    std::string name;
    if (fs::is_regular_file(p) && p.extension() == ".model") name = p.stem().string();
    else if (fs::is_directory(p) && fs::exists(p / "model.onnx")) name = p.filename().string();
    else continue;
    if (lower(name) == "td") set.td = load_classifier(p);
    else if (lower(name) == "multiclass") set.multiclass = load_classifier(p);
    else if (auto c = category_from_name(name)) set.categories[*c] = load_classifier(p);
  }
  return set;
}

// ---------------------------------------------------------------------------
// mine

StageResult run_mine(const RunConfig& config) {
  require_inputs(config, "mine");
  const auto files = expand_inputs(config.inputs);
  if (files.empty()) throw ArgumentError("mine: no input archives found");
  if (config.start && config.end && *config.start > *config.end)
    throw ArgumentError("mine: --start is after --end");

  // Files are parsed in parallel and merged in input order.
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  std::vector<IngestResult> results(files.size());
  for (std::size_t b = 0; b < files.size(); b += width) {
    std::vector<std::future<IngestResult>> jobs;
    for (std::size_t i = b; i < std::min(files.size(), b + width); ++i)
      jobs.push_back(std::async(std::launch::async, [&files, i] { return parse_event_file(files[i]); }));
    for (std::size_t i = 0; i < jobs.size(); ++i) results[b + i] = jobs[i].get();
  }

  Warnings warnings;
  IngestStats total;
  std::vector<IssueRecord> records;
  ordered_json per_file = ordered_json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& s = results[i].stats;
    total += s;
    per_file.push_back({{"path", files[i].generic_string()},
                        {"lines_read", s.lines_read},
                        {"records_emitted", s.records_emitted},
                        {"lines_skipped_malformed", s.lines_skipped_malformed},
                        {"events_skipped_wrong_type", s.events_skipped_wrong_type}});
    if (s.lines_skipped_malformed > 0)
      warnings.add(files[i].generic_string() + ": skipped " + std::to_string(s.lines_skipped_malformed) +
                   " malformed lines");
    records.insert(records.end(), results[i].records.begin(), results[i].records.end());
  }
  std::size_t before = records.size();
  if (config.start || config.end) {
    const UtcTime lo = config.start.value_or(UtcTime{std::chrono::seconds{std::numeric_limits<std::int64_t>::min() / 2}});
    const UtcTime hi = config.end.value_or(UtcTime{std::chrono::seconds{std::numeric_limits<std::int64_t>::max() / 2}});
    records = filter_by_date(records, lo, hi);
  }

  const fs::path issues = config.out / "issues.jsonl";
  atomic_write(issues, issues_to_jsonl(records));

  ordered_json summary;
  summary["lines_read"] = total.lines_read;
  summary["records_emitted"] = total.records_emitted;
  summary["lines_skipped_malformed"] = total.lines_skipped_malformed;
  summary["events_skipped_wrong_type"] = total.events_skipped_wrong_type;
  summary["outside_date_window"] = before - records.size();
  summary["records_written"] = records.size();
  summary["files"] = per_file;
  return finish(config, "mine", base_manifest("mine", config, files), {issues}, summary, warnings);
}

// ---------------------------------------------------------------------------
// curate

StageResult run_curate(const RunConfig& config) {
  require_inputs(config, "curate");
  const auto files = expand_inputs(config.inputs, ".jsonl");
  if (files.empty()) throw ArgumentError("curate: no issue JSONL inputs found");
  std::vector<IssueRecord> events;
  for (const auto& f : files) {
    auto part = read_issues_jsonl(f);
    events.insert(events.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const auto issues = collapse_events(events);
  auto cur = curate_records(issues, config);

  Warnings warnings;
  for (auto& w : cur.warnings) warnings.add(std::move(w));
  std::vector<fs::path> outputs;
  ordered_json datasets = ordered_json::object();
  const auto& rules = LabelRuleSet::standard();
  for (const auto& d : cur.datasets) {
    const fs::path file = config.out / "datasets" / (d.name + ".jsonl");
    atomic_write(file, dataset_to_jsonl(d.examples));
    ordered_json side;
    side["dataset"] = d.name;
    side["seed"] = config.seed;
    side["rule_set_version"] = rules.version();
    side["examples"] = d.examples.size();
    side["counts"] = d.counts;
    side["file"] = file_entry(file, config.out);
    const fs::path side_file = config.out / "datasets" / (d.name + ".manifest.json");
    atomic_write(side_file, dump(side));
    outputs.push_back(file);
    outputs.push_back(side_file);
    datasets[d.name] = d.counts;
  }
  const fs::path gt = config.out / "ground_truth.jsonl";
  std::string gt_text;
  for (const auto& g : cur.ground_truth) gt_text += ground_truth_to_json(g).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + '\n';
  atomic_write(gt, gt_text);
  outputs.push_back(gt);
  const fs::path rules_file = config.out / "label_rules.json";
  atomic_write(rules_file, rules.to_json());
  outputs.push_back(rules_file);

  ordered_json summary;
  summary["events"] = events.size();
  summary["issues"] = issues.size();
  summary["labeling"] = cur.stats;
  summary["ground_truth"] = cur.ground_truth.size();
  summary["datasets"] = datasets;
  return finish(config, "curate", base_manifest("curate", config, files), outputs, summary, warnings);
}

// ---------------------------------------------------------------------------
// split

StageResult run_split(const RunConfig& config) {
  require_inputs(config, "split");
  const auto files = stage_inputs(config, "datasets");
  if (files.empty()) throw ArgumentError("split: no dataset JSONL inputs found");
  Warnings warnings;
  std::vector<fs::path> outputs;
  ordered_json bundles = ordered_json::object();

  auto write_bundle = [&](const DatasetBundle& b, const std::string& kind) {
    const fs::path file = config.out / "bundles" / (b.name + ".jsonl");
    atomic_write(file, bundle_to_jsonl(b));
    ordered_json side;
    side["bundle"] = b.name;
    side["kind"] = kind;
    side["task"] = task_name(b.task);
    side["seed"] = b.seed;
    side["rule_set_version"] = LabelRuleSet::standard().version();
    side["withheld_repos"] = b.withheld_repos;
    side["dropped_for_balance"] = b.dropped_for_balance;
    side["counts"] = counts_json(b.class_counts());
    side["file"] = file_entry(file, config.out);
    const fs::path side_file = config.out / "bundles" / (b.name + ".manifest.json");
    atomic_write(side_file, dump(side));
    outputs.push_back(file);
    outputs.push_back(side_file);
    bundles[b.name] = side["counts"];
  };

  for (const auto& f : files) {
    const std::string name = stem_of(f);
    if (!config.selects(name)) continue;
    const auto examples = read_dataset(f);
    if (examples.empty()) {
      warnings.add("dataset '" + name + "' is empty; skipped");
      continue;
    }
    BundleOptions opts{config.ratio, config.k, config.ood_top_n, derive_seed(config.seed, "split/" + name)};
    write_bundle(make_bundle(name, examples, opts), "random");
    if (config.cutoff) {
      try {
        write_bundle(make_temporal_bundle(name + "-temporal", examples, *config.cutoff, config.k,
                                          derive_seed(config.seed, "temporal/" + name)),
                     "temporal");
      } catch (const CurationError& e) {
        warnings.add("temporal bundle for '" + name + "' skipped: " + e.what());
      }
    }
  }
  ordered_json summary;
  summary["bundles"] = bundles;
  return finish(config, "split", base_manifest("split", config, files), outputs, summary, warnings);
}

// ---------------------------------------------------------------------------
// train-baseline

StageResult run_train_baseline(const RunConfig& config) {
  require_inputs(config, "train-baseline");
  const auto files = stage_inputs(config, "bundles");
  if (files.empty()) throw ArgumentError("train-baseline: no bundle inputs found");
  Warnings warnings;
  std::vector<fs::path> outputs;
  ordered_json models = ordered_json::object();
  for (const auto& f : files) {
    const auto bundle = read_bundle(f);
    if (!config.selects(bundle.name)) continue;
    if (bundle.train.empty()) throw TrainingError("bundle '" + bundle.name + "' has an empty train split");
    TrainOptions opts;
    opts.epochs = config.epochs;
    opts.learning_rate = config.learning_rate;
    opts.seed = derive_seed(config.seed, "train/" + bundle.name);
    opts.dim = config.feature_dim;
    opts.threshold = config.threshold;

    std::vector<EvalReport> cv;
    ordered_json info;
    const fs::path model_file = config.out / (bundle.name + ".model");
    if (bundle.task == TaskKind::Binary) {
      auto r = train_baseline_binary(bundle.train, bundle.folds, opts, bundle.name);
      r.model.save(model_file);
      cv = r.fold_reports;
      info["loss_trace"] = r.model.loss_trace();
    } else {
      auto r = train_baseline_multiclass(bundle.train, bundle.folds, opts);
      r.model.save(model_file);
      for (auto& fr : r.fold_reports) {
        cv.push_back(fr.summary);
        cv.insert(cv.end(), fr.per_class.begin(), fr.per_class.end());
      }
      info["loss_trace"] = r.model.loss_trace();
    }
    const auto rendered = render_report(cv);
    const fs::path cv_json = config.out / (bundle.name + ".cv.json");
    const fs::path cv_txt = config.out / (bundle.name + ".cv.txt");
    atomic_write(cv_json, rendered.json);
    atomic_write(cv_txt, rendered.text);
    outputs.insert(outputs.end(), {model_file, cv_json, cv_txt});
    info["task"] = task_name(bundle.task);
    info["train_examples"] = bundle.train.size();
    info["seed"] = opts.seed;
    models[bundle.name] = info;
  }
  ordered_json summary;
  summary["models"] = models;
  return finish(config, "train-baseline", base_manifest("train-baseline", config, files), outputs, summary,
                warnings);
}

// ---------------------------------------------------------------------------
// evaluate

StageResult run_evaluate(const RunConfig& config) {
  require_inputs(config, "evaluate");
  if (config.model_dirs.empty()) throw ArgumentError("evaluate: --model-dir is required");
  for (const auto& m : config.model_dirs) {
    std::error_code ec;
    if (!fs::exists(m, ec)) throw LoadError("model path does not exist: '" + m.string() + "'");
  }
  const auto files = stage_inputs(config, "bundles");
  Warnings warnings;
  std::vector<EvalReport> reports;
  std::string predictions;
  std::vector<fs::path> model_inputs;
  for (const auto& f : files) {
    const auto bundle = read_bundle(f);
    if (!config.selects(bundle.name)) continue;
    for (const auto& given : config.model_dirs) {
      const fs::path path = resolve_model(given, bundle.name);
      model_inputs.push_back(path);
      auto model = load_with_threshold(path, config.threshold);
      if (model->task() != bundle.task)
        throw ArgumentError("model '" + path.string() + "' is " + std::string(task_name(model->task())) +
                            " but bundle '" + bundle.name + "' is " + std::string(task_name(bundle.task)));
      for (const auto& [split, part] : {std::pair<std::string, const std::vector<LabeledExample>*>{"test", &bundle.test},
                                        {"ood", &bundle.ood}}) {
        if (part->empty()) continue;
        const std::string split_name = bundle.name + "/" + split;
        const auto rows = predict_bundle(*model, *part);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          ordered_json p;
          p["model"] = model->name();
          p["split"] = split_name;
          p["id"] = rows[i].id;
          p["label"] = label_name((*part)[i].label);
          p["score"] = rows[i].score;
          p["predicted"] = bundle.task == TaskKind::Binary ? (rows[i].predicted ? "true" : "false")
                                                           : model->class_names().at(rows[i].predicted);
          predictions += p.dump() + '\n';
        }
        if (bundle.task == TaskKind::Binary) {
          std::vector<double> scores;
          std::vector<bool> truths;
          for (std::size_t i = 0; i < rows.size(); ++i) {
            scores.push_back(rows[i].score);
            truths.push_back(std::get<bool>((*part)[i].label));
          }
          auto rep = evaluate_binary(model->name(), split_name, scores, truths, config.threshold);
          if (!rep.auc) warnings.add(split_name + ": single-class split, AUC undefined");
          reports.push_back(std::move(rep));
        } else {
          std::vector<std::vector<double>> probs;
          for (const auto& r : rows) probs.push_back(r.probabilities);
          auto mc = evaluate_multiclass(model->name(), split_name, probs,
                                        truth_indices(*part, model->class_names()), model->class_names());
          reports.push_back(mc.summary);
          reports.insert(reports.end(), mc.per_class.begin(), mc.per_class.end());
        }
      }
    }
  }
  const auto rendered = render_report(reports);
  const fs::path rj = config.out / "reports.json", rt = config.out / "reports.txt",
                 pj = config.out / "predictions.jsonl";
  atomic_write(rj, rendered.json);
  atomic_write(rt, rendered.text);
  atomic_write(pj, predictions);
  ordered_json summary;
  summary["reports"] = reports.size();
  auto inputs = files;
  for (const auto& m : model_inputs)
    if (fs::is_regular_file(m)) inputs.push_back(m);
    else inputs.push_back(m / "model.onnx");
  return finish(config, "evaluate", base_manifest("evaluate", config, inputs), {rj, rt, pj}, summary, warnings);
}

// ---------------------------------------------------------------------------
// ensemble

StageResult run_ensemble(const RunConfig& config) {
  require_inputs(config, "ensemble");
  if (config.model_dirs.size() != 1) throw ArgumentError("ensemble: exactly one --model-dir is required");
  auto models = discover_models(config.model_dirs.front());
  if (!models.td) throw LoadError("ensemble: no TD model ('td.model' or 'td/') in '" +
                                  config.model_dirs.front().string() + "'");
  std::map<Category, std::shared_ptr<const TextClassifier>> members(models.categories.begin(),
                                                                      models.categories.end());
  Ensemble ensemble(models.td, members, config.threshold);
  Warnings warnings;
  const auto missing = ensemble.missing_categories();
  if (!missing.empty()) {
    std::string names;
    for (auto c : missing) names += (names.empty() ? "" : ", ") + std::string(category_name(c));
    warnings.add("no model for " + names + "; verdicts for these categories stay untyped");
  }

  const auto files = expand_inputs(config.inputs, ".jsonl");
  std::string out_text;
  std::size_t n = 0, td = 0, typed = 0;
  for (const auto& f : files) {
    std::size_t lineno = 0;
    std::istringstream in(read_text_file(f));
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw FormatError(f.string() + ":" + std::to_string(lineno) + ": not a JSON object");
      std::string id, text;
      if (j.contains("text") && j["text"].is_string()) {
        text = j["text"].get<std::string>();
        id = j.value("id", std::string());
      } else if (j.contains("title")) {
        const auto issue = issue_from_json(j);
        text = normalize_text(issue.title + " " + issue.body);
        id = issue.key();
      } else {
        throw FormatError(f.string() + ":" + std::to_string(lineno) + ": row has neither 'text' nor 'title'");
      }
      if (id.empty()) id = f.filename().string() + ":" + std::to_string(lineno);
      const auto v = ensemble.classify(text);
      ordered_json row;
      row["id"] = id;
      row["is_td"] = v.is_td;
      row["td_score"] = v.td_score;
      ordered_json typed_debt = ordered_json::array();
      for (auto c : v.typed_debt.to_vector()) typed_debt.push_back(category_name(c));
      row["typed_debt"] = typed_debt;
      ordered_json scores = ordered_json::object();
      for (auto c : kAllCategories)
        if (v.category_scores[index_of(c)]) scores[std::string(category_name(c))] = *v.category_scores[index_of(c)];
      row["category_scores"] = scores;
      out_text += row.dump() + '\n';
      ++n;
      td += v.is_td;
      typed += !v.typed_debt.empty();
    }
  }
  const fs::path out = config.out / "verdicts.jsonl";
  atomic_write(out, out_text);
  ordered_json summary;
  summary["texts"] = n;
  summary["td"] = td;
  summary["typed_td"] = typed;
  ordered_json present = ordered_json::array();
  for (const auto& [c, m] : members) present.push_back(category_name(c));
  summary["category_models"] = present;
  return finish(config, "ensemble", base_manifest("ensemble", config, files), {out}, summary, warnings);
}

// ---------------------------------------------------------------------------
// ground-truth-eval

StageResult run_ground_truth_eval(const RunConfig& config) {
  require_inputs(config, "ground-truth-eval");
  if (config.model_dirs.size() != 1) throw ArgumentError("ground-truth-eval: exactly one --model-dir is required");
  auto models = discover_models(config.model_dirs.front());
  Warnings warnings;
  const auto files = expand_inputs(config.inputs, ".jsonl");
  std::vector<GroundTruthItem> items;
  for (const auto& f : files) {
    auto part = read_ground_truth(f);
    items.insert(items.end(), part.begin(), part.end());
  }
  std::vector<CategorySet> truth;
  for (const auto& g : items) truth.push_back(g.categories);

  GroundTruthPredictions preds;
  if (models.multiclass) {
    models.multiclass->set_threshold(config.threshold);
    const auto names = models.multiclass->class_names();
    std::vector<Category> predicted;
    for (const auto& g : items) {
      const auto& n = names.at(models.multiclass->predict_class(g.text));
      auto c = category_from_name(n);
      if (!c) throw LoadError("multiclass model emits unknown category '" + n + "'");
      predicted.push_back(*c);
    }
    preds.multiclass = std::move(predicted);
  } else {
    warnings.add("no multiclass model; its column is null");
  }
  for (auto& [c, m] : models.categories) {
    m->set_threshold(config.threshold);
    std::vector<bool> fired;
    for (const auto& g : items) fired.push_back(m->predict(g.text));
    preds.per_category[index_of(c)] = std::move(fired);
  }
  if (models.categories.size() < kCategoryCount) warnings.add("missing per-category models leave null recalls");
  if (models.td) {
    models.td->set_threshold(config.threshold);
    std::vector<bool> fired;
    for (const auto& g : items) fired.push_back(models.td->predict(g.text));
    preds.td_only = std::move(fired);
  } else {
    warnings.add("no TD model; its column is null");
  }
  const auto rows = ground_truth_recall(truth, preds);
  const auto rendered = render_ground_truth(rows, {"multiclass", "binary", "td"});
  const fs::path rj = config.out / "ground_truth_recall.json", rt = config.out / "ground_truth_recall.txt";
  atomic_write(rj, rendered.json);
  atomic_write(rt, rendered.text);
  ordered_json summary;
  summary["items"] = items.size();
  return finish(config, "ground-truth-eval", base_manifest("ground-truth-eval", config, files), {rj, rt}, summary,
                warnings);
}

}  // namespace debtlens
