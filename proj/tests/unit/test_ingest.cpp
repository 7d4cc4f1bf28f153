#include <doctest/doctest.h>
#include <zlib.h>

#include <sstream>

#include "debtlens/ingest.hpp"
#include "helpers.hpp"

using namespace debtlens;

namespace {

std::string gzip(const std::string& data) {
  z_stream zs{};
  REQUIRE(deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) == Z_OK);
  std::string out(deflateBound(&zs, data.size()) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  REQUIRE(deflate(&zs, Z_FINISH) == Z_STREAM_END);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

std::string event(const std::string& action, const std::string& repo = "octo/repo", int number = 1,
                  const std::string& labels = R"([{"name":"tech-debt"}])") {
  return R"({"type":"IssuesEvent","repo":{"name":")" + repo + R"("},"payload":{"action":")" + action +
         R"(","issue":{"number":)" + std::to_string(number) +
         R"(,"title":"T","body":"B","labels":)" + labels + R"(,"created_at":"2020-05-01T10:00:00Z"}}})";
}

IngestResult parse(const std::string& bytes) {
  std::istringstream in(bytes);
  return parse_event_stream(in, "mem");
}

}  // namespace

TEST_CASE("decode_event_line classifies lines") {
  IssueRecord r;
  CHECK(decode_event_line(event("opened"), r) == LineOutcome::Record);
  CHECK(r.repo_name == "octo/repo");
  CHECK(r.issue_id == 1);
  CHECK(r.labels == std::vector<std::string>{"tech-debt"});
  CHECK(format_utc(r.created_at) == "2020-05-01T10:00:00Z");
  CHECK(r.key() == "octo/repo#1");

  CHECK(decode_event_line(event("labeled", "a/b", 2, R"(["plain", {"name":"obj"}])"), r) == LineOutcome::Record);
  CHECK(r.labels == std::vector<std::string>{"plain", "obj"});
  CHECK(decode_event_line(event("closed"), r) == LineOutcome::WrongType);
  CHECK(decode_event_line(R"({"type":"PushEvent"})", r) == LineOutcome::WrongType);
  CHECK(decode_event_line("{not json", r) == LineOutcome::Malformed);
  CHECK(decode_event_line("", r) == LineOutcome::Malformed);
  CHECK(decode_event_line("[1,2]", r) == LineOutcome::Malformed);
  CHECK(decode_event_line(event("opened", "norepo"), r) == LineOutcome::Malformed);
  CHECK(decode_event_line(event("opened", "a/b/c"), r) == LineOutcome::Malformed);
  CHECK(decode_event_line(event("opened", "a/b", 1, R"("td")"), r) == LineOutcome::Malformed);
  CHECK(decode_event_line(event("opened", "a/b", 1, "null"), r) == LineOutcome::Record);
  CHECK(r.labels.empty());
}

TEST_CASE("plain, gzip and multi-member gzip streams yield the same records") {
  std::string text;
  for (int i = 0; i < 200; ++i) text += event(i % 3 ? "opened" : "edited", "o/r", i) + "\n";
  text += "garbage\n" + event("opened", "o/r", 999);  // final line without newline
  const auto plain = parse(text);
  CHECK(plain.stats.lines_read == 202);
  CHECK(plain.stats.lines_skipped_malformed == 1);
  CHECK(plain.stats.events_skipped_wrong_type == 67);
  CHECK(plain.stats.records_emitted == 134);
  CHECK(plain.stats.balanced());

  const auto gz = parse(gzip(text));
  CHECK(gz.records == plain.records);
  CHECK(gz.stats == plain.stats);

  const auto cut = text.find('\n', text.size() / 2) + 1;
  const auto multi = parse(gzip(text.substr(0, cut)) + gzip(text.substr(cut)));
  CHECK(multi.records == plain.records);

  // A member boundary inside a line joins the two halves.
  const auto split_line = parse(gzip(text.substr(0, cut + 10)) + gzip(text.substr(cut + 10)));
  CHECK(split_line.records == plain.records);
}

TEST_CASE("CRLF line endings are accepted") {
  const auto r = parse(event("opened") + "\r\n" + event("opened", "o/r", 2) + "\r\n");
  CHECK(r.stats.records_emitted == 2);
}

TEST_CASE("corrupt or truncated gzip raises StreamError with an offset") {
  std::string text;
  for (int i = 0; i < 500; ++i) text += event("opened", "o/r", i) + "\n";
  const auto gz = gzip(text);
  CHECK_THROWS_AS(parse(gz.substr(0, gz.size() / 2)), StreamError);
  auto bad = gz;
  bad[bad.size() / 2] ^= 0x55;
  bad[bad.size() / 2 + 1] ^= 0x55;
  try {
    parse(bad);
    FAIL("expected StreamError");
  } catch (const StreamError& e) {
    CHECK(std::string(e.what()).find("mem") != std::string::npos);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("the fixture archive parses with balanced counts") {
  const auto r = parse_event_file(testing::fixture("archive/events.json.gz"));
  CHECK(r.stats.lines_read == 10000);
  CHECK(r.stats.balanced());
  CHECK_THROWS_AS(parse_event_file(testing::fixture("archive/missing.json.gz")), StreamError);
}

TEST_CASE("filter_by_date is half-open") {
  std::vector<IssueRecord> rs(3);
  rs[0].created_at = parse_utc_or_throw("2014-12-31T23:59:59Z");
  rs[1].created_at = parse_utc_or_throw("2015-01-01T00:00:00Z");
  rs[2].created_at = parse_utc_or_throw("2025-01-01T00:00:00Z");
  const auto kept = filter_by_date(rs, parse_utc_or_throw("2015-01-01"), parse_utc_or_throw("2025-01-01"));
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].created_at == rs[1].created_at);
}
