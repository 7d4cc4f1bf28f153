#include <doctest/doctest.h>
#include <sys/wait.h>
#include <zlib.h>

#include <cstdlib>
#include <map>

#include "debtlens/pipeline.hpp"
#include "helpers.hpp"

using namespace debtlens;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const testing::TempDir& tmp) {
  const auto out = tmp / "stdout.txt", err = tmp / "stderr.txt";
  const std::string cmd = std::string(DEBTLENS_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::slurp(out);
  r.err = testing::slurp(err);
  return r;
}

std::map<std::string, std::string> digest_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  return out;
}

RunConfig config(const fs::path& in, const fs::path& out) {
  RunConfig c;
  c.inputs = {in};
  c.out = out;
  return c;
}

IssueRecord rec(const std::string& repo, int id, std::vector<std::string> labels, const std::string& title) {
  IssueRecord r;
  r.repo_name = repo;
  r.issue_id = id;
  r.labels = std::move(labels);
  r.title = title;
  r.created_at = parse_utc_or_throw("2020-01-01");
  return r;
}

}  // namespace

TEST_CASE("collapse_events unions labels and keeps the last text") {
  const auto out = collapse_events({rec("o/r", 1, {}, "first"), rec("o/r", 2, {"bug"}, "other"),
                                    rec("o/r", 1, {"td", "bug"}, "second"), rec("o/r", 1, {"td"}, "third")});
  REQUIRE(out.size() == 2);
  CHECK(out[0].title == "third");
  CHECK(out[0].labels == std::vector<std::string>{"td", "bug"});
  CHECK(out[1].title == "other");
}

TEST_CASE("curation without TD positives is an error") {
  std::vector<IssueRecord> rs;
  for (int i = 0; i < 5; ++i) rs.push_back(rec("o/r", i, {"bug"}, "a sufficiently long title number " + std::to_string(i)));
  CHECK_THROWS_AS(curate_records(rs, RunConfig{}), CurationError);
}

TEST_CASE("curation drops ground truth and skips empty categories with a warning") {
  std::vector<IssueRecord> rs;
  for (int i = 0; i < 6; ++i) rs.push_back(rec("o/r", i, {"tech-debt"}, "technical debt issue text number " + std::to_string(i)));
  for (int i = 0; i < 9; ++i) rs.push_back(rec("o/r", 100 + i, {}, "unrelated residual issue text number " + std::to_string(i)));
  rs.push_back(rec("o/r", 200, {"tech-debt", "test"}, "ground truth issue with both kinds of label"));
  const auto cur = curate_records(rs, RunConfig{});
  REQUIRE(cur.datasets.size() == 1);
  CHECK(cur.datasets[0].name == "td");
  CHECK(cur.datasets[0].examples.size() == 12);
  REQUIRE(cur.ground_truth.size() == 1);
  CHECK(cur.ground_truth[0].id == "o/r#200");
  CHECK_FALSE(cur.warnings.empty());
}

TEST_CASE("mine -> curate -> split is reproducible and writes manifests") {
  testing::TempDir tmp;
  auto mine = config(testing::fixture("archive"), tmp / "mine");
  mine.start = parse_utc_or_throw("2015-01-01");
  mine.end = parse_utc_or_throw("2025-01-01");
  auto cur = config(tmp / "mine", tmp / "curate");
  auto split = config(tmp / "curate" / "datasets", tmp / "split");
  split.cutoff = parse_utc_or_throw("2024-01-01");

  std::map<std::string, std::string> first;
  for (int round = 0; round < 2; ++round) {
    run_mine(mine);
    run_curate(cur);
    const auto r = run_split(split);
    CHECK(fs::exists(r.manifest));
    const auto digests = digest_tree(tmp.path());
    if (round == 0) first = digests;
    else CHECK(digests == first);
  }
  const auto manifest = testing::read_json(tmp / "split/split.manifest.json");
  for (const char* key : {"tool", "version", "stage", "seed", "rule_set_version", "config", "inputs", "outputs"})
    CHECK_MESSAGE(manifest.contains(key), key);
  CHECK(manifest["seed"] == kDefaultSeed);
  CHECK(manifest["inputs"][0].contains("sha256"));

  // A different seed changes the split.
  split.seed = 7;
  split.out = tmp / "split7";
  run_split(split);
  CHECK(sha256_file(tmp / "split7/bundles/td.jsonl") != sha256_file(tmp / "split/bundles/td.jsonl"));

  // Dataset rows survive a read/write round trip.
  const auto rows = read_dataset_jsonl(tmp / "split/bundles/td.jsonl");
  const auto bundle = read_bundle(tmp / "split/bundles/td.jsonl");
  CHECK(rows.size() == bundle.train.size() + bundle.test.size() + bundle.ood.size());
  CHECK(bundle_to_jsonl(bundle) == testing::slurp(tmp / "split/bundles/td.jsonl"));
}

TEST_CASE("train, evaluate, ensemble and ground-truth evaluation run end to end") {
  testing::TempDir tmp;
  auto mine = config(testing::fixture("archive"), tmp / "mine");
  run_mine(mine);
  run_curate(config(tmp / "mine", tmp / "curate"));
  run_split(config(tmp / "curate" / "datasets", tmp / "split"));

  auto train = config(tmp / "split" / "bundles", tmp / "models");
  train.feature_dim = 1 << 12;
  train.epochs = 20;
  train.categories = {"td", "Test", "Code", "multiclass"};
  run_train_baseline(train);
  CHECK(fs::exists(tmp / "models/td.model"));
  CHECK(fs::exists(tmp / "models/td.cv.json"));
  CHECK(fs::exists(tmp / "models/multiclass.model"));

  auto eval = config(tmp / "split" / "bundles" / "td.jsonl", tmp / "eval");
  eval.model_dirs = {tmp / "models"};
  run_evaluate(eval);
  const auto reports = testing::read_json(tmp / "eval/reports.json");
  CHECK(reports.size() >= 2);

  auto ens = config(tmp / "mine", tmp / "ensemble");
  ens.model_dirs = {tmp / "models"};
  run_ensemble(ens);
  CHECK(fs::exists(tmp / "ensemble/verdicts.jsonl"));

  auto gt = config(tmp / "curate" / "ground_truth.jsonl", tmp / "gt");
  gt.model_dirs = {tmp / "models"};
  run_ground_truth_eval(gt);
  CHECK(testing::read_json(tmp / "gt/ground_truth_recall.json").size() == kCategoryCount);

  eval.model_dirs = {tmp / "no-such-models"};
  try {
    run_evaluate(eval);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("no-such-models") != std::string::npos);
  }
}

TEST_CASE("stage output directories chain as inputs") {
  testing::TempDir tmp;
  run_mine(config(testing::fixture("archive"), tmp / "mine"));
  run_curate(config(tmp / "mine", tmp / "curate"));
  auto split = config(tmp / "curate", tmp / "split");
  split.categories = {"td"};
  run_split(split);
  CHECK(fs::exists(tmp / "split/bundles/td.jsonl"));

  auto train = config(tmp / "split", tmp / "models");
  train.feature_dim = 1 << 10;
  train.categories = {"td"};
  run_train_baseline(train);
  CHECK(fs::exists(tmp / "models/td.model"));

  auto eval = config(tmp / "split", tmp / "eval");
  eval.model_dirs = {tmp / "models"};
  run_evaluate(eval);
  CHECK(testing::read_json(tmp / "eval/reports.json").size() >= 2);
}

TEST_CASE("the CLI reports failures as one JSON line") {
  testing::TempDir tmp;

  auto r = run_cli("mine --out " + (tmp / "o").string(), tmp);
  CHECK(r.code == 2);
  auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"] == "argument");
  CHECK(err["message"].get<std::string>().find("input") != std::string::npos);

  r = run_cli("bogus", tmp);
  CHECK(r.code == 2);

  std::ofstream(tmp / "broken.json.gz", std::ios::binary) << "\x1f\x8b\x08\x00garbage";
  r = run_cli("mine -i " + (tmp / "broken.json.gz").string() + " -o " + (tmp / "o").string(), tmp);
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"] == "stream");

  DatasetBundle b;
  b.name = "td";
  b.train = {testing::example("a", "text a", true), testing::example("b", "text b", false)};
  atomic_write(tmp / "td.jsonl", bundle_to_jsonl(b));
  r = run_cli("evaluate -i " + (tmp / "td.jsonl").string() + " -o " + (tmp / "o").string() +
                  " --model-dir " + (tmp / "missing").string(),
              tmp);
  CHECK(r.code == 1);
  err = nlohmann::json::parse(r.err);
  CHECK(err["error"] == "load");
  CHECK(err["message"].get<std::string>().find("missing") != std::string::npos);

  r = run_cli("mine -i " + testing::fixture("archive").string() + " -o " + (tmp / "m").string(), tmp);
  CHECK(r.code == 0);
  CHECK(fs::exists(nlohmann::json::parse(r.out)["manifest"].get<std::string>()));

  r = run_cli("rules", tmp);
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["version"] == "td-label-rules/1");
}
