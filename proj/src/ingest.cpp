#include "debtlens/ingest.hpp"

#include <zlib.h>

#include <array>
#include <fstream>
#include <nlohmann/json.hpp>

namespace debtlens {

using nlohmann::json;

IngestStats& IngestStats::operator+=(const IngestStats& o) {
  lines_read += o.lines_read;
  records_emitted += o.records_emitted;
  lines_skipped_malformed += o.lines_skipped_malformed;
  events_skipped_wrong_type += o.events_skipped_wrong_type;
  return *this;
}

namespace {

constexpr std::size_t kChunk = 1 << 16;

class LineSplitter {
 public:
  explicit LineSplitter(const std::function<void(std::string_view, std::uint64_t)>& sink)
      : sink_(sink) {}

  void feed(const char* data, std::size_t n) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (data[i] != '\n') continue;
      if (pending_.empty()) {
        emit(std::string_view(data + start, i - start));
      } else {
        pending_.append(data + start, i - start);
        emit(pending_);
        pending_.clear();
      }
      start = i + 1;
    }
    pending_.append(data + start, n - start);
  }

  void finish() {
    if (!pending_.empty()) emit(pending_);
    pending_.clear();
  }

 private:
  void emit(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    sink_(line, ++line_no_);
  }

  const std::function<void(std::string_view, std::uint64_t)>& sink_;
  std::string pending_;
  std::uint64_t line_no_ = 0;
};

[[noreturn]] void corrupt(std::string_view name, std::uint64_t offset, std::string_view what) {
  throw StreamError("corrupt gzip stream in '" + std::string(name) + "' at byte offset " +
                    std::to_string(offset) + ": " + std::string(what));
}

void inflate_stream(std::istream& in, std::string_view name, std::string first_bytes,
                    LineSplitter& lines) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw StreamError("zlib initialisation failed");
  struct Guard {
    z_stream* z;
    ~Guard() { inflateEnd(z); }
  } guard{&zs};

  std::array<char, kChunk> inbuf{};
  std::array<char, kChunk> outbuf{};
  std::uint64_t consumed = 0;  // compressed bytes handed to zlib and used
  bool member_done = false;
  std::string carry = std::move(first_bytes);

  for (;;) {
    std::size_t have = 0;
    if (!carry.empty()) {
      have = carry.size();
      std::copy(carry.begin(), carry.end(), inbuf.begin());
      carry.clear();
    } else {
      in.read(inbuf.data(), static_cast<std::streamsize>(inbuf.size()));
      have = static_cast<std::size_t>(in.gcount());
      if (in.bad()) throw StreamError("read failure on '" + std::string(name) + "'");
    }
    if (have == 0) {
      if (!member_done) corrupt(name, consumed, "unexpected end of compressed data");
      return;
    }
    zs.next_in = reinterpret_cast<Bytef*>(inbuf.data());
    zs.avail_in = static_cast<uInt>(have);
    do {
      if (member_done) {
        if (zs.avail_in == 0) break;
        // Concatenated member follows; tolerate trailing zero padding.
        if (*zs.next_in == 0) {
          ++zs.next_in;
          --zs.avail_in;
          ++consumed;
          continue;
        }
        inflateReset(&zs);
        member_done = false;
      }
      zs.next_out = reinterpret_cast<Bytef*>(outbuf.data());
      zs.avail_out = static_cast<uInt>(outbuf.size());
      uInt before = zs.avail_in;
      int rc = inflate(&zs, Z_NO_FLUSH);
      consumed += before - zs.avail_in;
      if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR)
        corrupt(name, consumed, zs.msg ? zs.msg : "inflate error");
      lines.feed(outbuf.data(), outbuf.size() - zs.avail_out);
      if (rc == Z_STREAM_END) member_done = true;
      if (rc == Z_BUF_ERROR) break;
    } while (zs.avail_in > 0 || zs.avail_out == 0);
  }
}

const json* find_path(const json& j, std::initializer_list<const char*> path) {
  const json* cur = &j;
  for (const char* key : path) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(key);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

bool valid_repo_name(const std::string& name) {
  auto slash = name.find('/');
  return !name.empty() && slash != std::string::npos && slash != 0 &&
         slash + 1 != name.size() && name.find('/', slash + 1) == std::string::npos;
}

}  // namespace

void for_each_line(std::istream& source, std::string_view source_name,
                   const std::function<void(std::string_view, std::uint64_t)>& on_line) {
  LineSplitter lines(on_line);
  std::string head(2, '\0');
  source.read(head.data(), 2);
  head.resize(static_cast<std::size_t>(source.gcount()));
  if (head.size() == 2 && static_cast<unsigned char>(head[0]) == 0x1f &&
      static_cast<unsigned char>(head[1]) == 0x8b) {
    inflate_stream(source, source_name, std::move(head), lines);
  } else {
    lines.feed(head.data(), head.size());
    std::array<char, kChunk> buf{};
    while (source) {
      source.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      lines.feed(buf.data(), static_cast<std::size_t>(source.gcount()));
    }
    if (source.bad()) throw StreamError("read failure on '" + std::string(source_name) + "'");
  }
  lines.finish();
}

LineOutcome decode_event_line(std::string_view line, IssueRecord& out) {
  json event = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (event.is_discarded() || !event.is_object()) return LineOutcome::Malformed;

  const json* type = find_path(event, {"type"});
  if (!type || !type->is_string()) return LineOutcome::Malformed;
  if (type->get_ref<const std::string&>() != "IssuesEvent") return LineOutcome::WrongType;

  const json* action = find_path(event, {"payload", "action"});
  if (!action || !action->is_string()) return LineOutcome::Malformed;
  const auto& act = action->get_ref<const std::string&>();
  if (act != "opened" && act != "labeled") return LineOutcome::WrongType;

  const json* issue = find_path(event, {"payload", "issue"});
  const json* repo = find_path(event, {"repo", "name"});
  if (!issue || !issue->is_object() || !repo || !repo->is_string()) return LineOutcome::Malformed;

  IssueRecord rec;
  rec.repo_name = repo->get<std::string>();
  if (!valid_repo_name(rec.repo_name)) return LineOutcome::Malformed;

  const json* number = find_path(*issue, {"number"});
  if (!number || !number->is_number_integer()) number = find_path(*issue, {"id"});
  if (!number || !number->is_number_integer()) return LineOutcome::Malformed;
  rec.issue_id = number->get<std::int64_t>();

  const json* title = find_path(*issue, {"title"});
  if (!title || !title->is_string()) return LineOutcome::Malformed;
  rec.title = title->get<std::string>();

  const json* body = find_path(*issue, {"body"});
  if (body && body->is_string()) rec.body = body->get<std::string>();
  else if (body && !body->is_null()) return LineOutcome::Malformed;

  const json* created = find_path(*issue, {"created_at"});
  if (!created || !created->is_string()) return LineOutcome::Malformed;
  auto ts = parse_utc(created->get_ref<const std::string&>());
  if (!ts) return LineOutcome::Malformed;
  rec.created_at = *ts;

  if (const json* labels = find_path(*issue, {"labels"}); labels && !labels->is_null()) {
    if (!labels->is_array()) return LineOutcome::Malformed;
    for (const auto& l : *labels) {
      const json* name = l.is_object() ? find_path(l, {"name"}) : &l;
      if (!name || !name->is_string()) return LineOutcome::Malformed;
      auto text = name->get<std::string>();
      if (!text.empty()) rec.labels.push_back(std::move(text));
    }
  }
  rec.action = act;
  out = std::move(rec);
  return LineOutcome::Record;
}

IngestResult parse_event_stream(std::istream& source, std::string_view source_name) {
  IngestResult result;
  for_each_line(source, source_name, [&](std::string_view line, std::uint64_t) {
    ++result.stats.lines_read;
    IssueRecord rec;
    switch (decode_event_line(line, rec)) {
      case LineOutcome::Record:
        ++result.stats.records_emitted;
        result.records.push_back(std::move(rec));
        break;
      case LineOutcome::Malformed:
        ++result.stats.lines_skipped_malformed;
        break;
      case LineOutcome::WrongType:
        ++result.stats.events_skipped_wrong_type;
        break;
    }
  });
  return result;
}

IngestResult parse_event_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StreamError("cannot open archive '" + path.string() + "'");
  return parse_event_stream(in, path.string());
}

std::vector<IssueRecord> filter_by_date(const std::vector<IssueRecord>& records, UtcTime start,
                                        UtcTime end) {
  if (start > end)
    throw ArgumentError("filter_by_date: start " + format_utc(start) + " is after end " +
                        format_utc(end));
  std::vector<IssueRecord> out;
  for (const auto& r : records)
    if (r.created_at >= start && r.created_at < end) out.push_back(r);
  return out;
}

}  // namespace debtlens
