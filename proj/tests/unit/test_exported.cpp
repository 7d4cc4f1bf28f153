#include <doctest/doctest.h>

#include <fstream>
#include <functional>

#include "debtlens/bpe_tokenizer.hpp"
#include "debtlens/exported_model.hpp"
#include "helpers.hpp"

using namespace debtlens;
namespace fs = std::filesystem;

namespace {

std::string load_error(const fs::path& dir) {
  try {
    load_exported_model(dir);
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

void copy_export(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  for (const auto& e : fs::directory_iterator(from)) fs::copy_file(e.path(), to / e.path().filename());
}

void edit_card(const fs::path& dir, const std::function<void(nlohmann::json&)>& edit) {
  auto card = testing::read_json(dir / "card.json");
  edit(card);
  std::ofstream(dir / "card.json") << card.dump(2);
}

}  // namespace

TEST_CASE("tokenizer ids match the reference tokenizer") {
  const auto tok = ByteLevelBpeTokenizer::from_file(testing::fixture("exported/td/tokenizer.json"));
  const auto rows = testing::read_json(testing::fixture("tokenizer_ids.json"));
  REQUIRE(rows.size() >= 20);
  for (const auto& r : rows) {
    INFO(r["text"].get<std::string>().substr(0, 60), " max_length=", r["max_length"]);
    CHECK(tok.encode(r["text"].get<std::string>(), r["max_length"].get<std::size_t>()) ==
          r["ids"].get<std::vector<std::int64_t>>());
  }
}

TEST_CASE("exported models load and meet parity") {
  for (const char* name : {"td", "multiclass"}) {
    INFO(name);
    const auto dir = testing::fixture(std::string("exported/") + name);
    const auto m = load_exported_model(dir);
    const auto rep = check_parity(*m, dir / "parity.jsonl");
    CHECK(rep.rows == 64);
    CHECK(rep.max_abs_delta <= kParityTolerance);
  }
  const auto td = load_exported_model(testing::fixture("exported/td"));
  CHECK(td->task() == TaskKind::Binary);
  CHECK(td->target() == "td");
  const double s = td->score("refactor the legacy workaround");
  CHECK(s >= 0);
  CHECK(s <= 1);

  const auto mc = load_exported_model(testing::fixture("exported/multiclass"));
  CHECK(mc->task() == TaskKind::Multiclass);
  const auto p = mc->score_multi("update the docs");
  CHECK(p.size() == 13);
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(load_classifier(testing::fixture("exported/multiclass"))->class_names().size() == 13);
}

TEST_CASE("missing contract files are named") {
  testing::TempDir tmp;
  const char* files[][2] = {{"model.onnx", "inference graph"},
                            {"tokenizer.json", "tokenizer config"},
                            {"card.json", "model card"},
                            {"parity.jsonl", "parity fixture"}};
  for (const auto& f : files) {
    const auto dir = tmp / (std::string("no-") + f[0]);
    copy_export(testing::fixture("exported/td"), dir);
    fs::remove(dir / f[0]);
    const auto msg = load_error(dir);
    INFO(msg);
    CHECK(msg.find(f[1]) != std::string::npos);
    CHECK(msg.find(f[0]) != std::string::npos);
  }
  CHECK(load_error(tmp / "nowhere").find("not found") != std::string::npos);
}

TEST_CASE("contract violations raise LoadError naming the item") {
  testing::TempDir tmp;
  const auto src = testing::fixture("exported/td");

  const auto shape = tmp / "shape";
  copy_export(src, shape);
  edit_card(shape, [](auto& c) {
    c["task"] = "multiclass";
    c["label_order"] = std::vector<std::string>{"Architecture", "Automation", "Build", "Code", "Defect",
                                                "Design", "Documentation", "Infrastructure", "People",
                                                "Process", "Requirement", "Service", "Test"};
  });
  CHECK(load_error(shape).find("shape mismatch") != std::string::npos);

  const auto input = tmp / "input";
  copy_export(src, input);
  edit_card(input, [](auto& c) { c["input_names"] = std::vector<std::string>{"input_ids"}; });
  CHECK(load_error(input).find("graph input mismatch") != std::string::npos);

  const auto output = tmp / "output";
  copy_export(src, output);
  edit_card(output, [](auto& c) { c["output_name"] = "scores"; });
  CHECK(load_error(output).find("graph output mismatch") != std::string::npos);

  const auto trunc = tmp / "trunc";
  copy_export(src, trunc);
  edit_card(trunc, [](auto& c) { c["truncation"] = "tail"; });
  CHECK(load_error(trunc).find("card.json") != std::string::npos);

  const auto parity = tmp / "parity";
  copy_export(src, parity);
  {
    std::ofstream out(parity / "parity.jsonl");
    out << R"({"text": "some text", "score": 0.123})" << "\n" << R"({"text": "other", "score": 0.999})" << "\n";
  }
  CHECK(load_error(parity).find("parity") != std::string::npos);

  const auto graph = tmp / "graph";
  copy_export(src, graph);
  fs::copy_file(testing::fixture("onnx_ops/unsupported_op.onnx"), graph / "model.onnx",
                fs::copy_options::overwrite_existing);
  CHECK(load_error(graph).find("unsupported operator") != std::string::npos);
}
