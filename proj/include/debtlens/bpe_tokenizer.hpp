#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace debtlens {

/// Byte-level BPE tokenizer read from a `tokenizer.json` (vocabulary, merge
/// rules, added/special tokens and a RoBERTa-style post-processor).
class ByteLevelBpeTokenizer {
 public:
  static ByteLevelBpeTokenizer from_file(const std::filesystem::path& path);
  static ByteLevelBpeTokenizer from_json(std::string_view json_text);

  /// Token ids with <s> ... </s>; content is head-truncated so the result
  /// holds at most `max_length` ids.
  std::vector<std::int64_t> encode(std::string_view text, std::size_t max_length) const;

  /// BPE pieces (byte-level alphabet) without special tokens.
  std::vector<std::string> tokenize(std::string_view text) const;

  std::int64_t cls_id() const { return cls_id_; }
  std::int64_t sep_id() const { return sep_id_; }
  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  std::vector<std::string> bpe(const std::string& word) const;
  void encode_plain(std::string_view text, std::vector<std::int64_t>& out) const;

  std::unordered_map<std::string, std::int64_t> vocab_;
  std::map<std::pair<std::string, std::string>, std::size_t> merge_ranks_;
  std::vector<std::pair<std::string, std::int64_t>> added_tokens_;  // longest first
  std::int64_t cls_id_ = -1;
  std::int64_t sep_id_ = -1;
  std::int64_t unk_id_ = -1;
  bool add_prefix_space_ = false;
};

}  // namespace debtlens
