#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "debtlens/common.hpp"

namespace debtlens {

/// One issue event mined from an archive stream. Immutable once built.
struct IssueRecord {
  std::string repo_name;  // "owner/name"
  std::int64_t issue_id = 0;
  std::string title;
  std::string body;
  std::vector<std::string> labels;
  UtcTime created_at{};
  std::string action;

  /// Identity used for leakage removal: "owner/name#issue_id".
  std::string key() const { return repo_name + "#" + std::to_string(issue_id); }

  friend bool operator==(const IssueRecord&, const IssueRecord&) = default;
};

struct IngestStats {
  std::uint64_t lines_read = 0;
  std::uint64_t records_emitted = 0;
  std::uint64_t lines_skipped_malformed = 0;
  std::uint64_t events_skipped_wrong_type = 0;

  bool balanced() const {
    return lines_read == records_emitted + lines_skipped_malformed + events_skipped_wrong_type;
  }
  IngestStats& operator+=(const IngestStats& o);
  friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

struct IngestResult {
  std::vector<IssueRecord> records;
  IngestStats stats;
};

/// Calls `on_line(line, line_number)` for every newline-delimited line of
/// `source`. Gzip input (single or multi-member) is detected by its magic
/// bytes; anything else is read as plain text. A trailing '\r' is stripped
/// and a final unterminated line is still delivered.
///
/// Throws StreamError naming `source_name` and the compressed byte offset
/// when the gzip container is corrupt or truncated.
void for_each_line(std::istream& source, std::string_view source_name,
                   const std::function<void(std::string_view, std::uint64_t)>& on_line);

/// Outcome of decoding one event line.
enum class LineOutcome { Record, Malformed, WrongType };

/// Decodes a single archive event. Only IssuesEvent lines with action
/// "opened" or "labeled" produce a record.
LineOutcome decode_event_line(std::string_view line, IssueRecord& out);

IngestResult parse_event_stream(std::istream& source, std::string_view source_name);
IngestResult parse_event_file(const std::filesystem::path& path);

/// Records with start <= created_at < end, in input order.
std::vector<IssueRecord> filter_by_date(const std::vector<IssueRecord>& records, UtcTime start,
                                        UtcTime end);

}  // namespace debtlens
