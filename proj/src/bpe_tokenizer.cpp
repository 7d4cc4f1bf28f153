#include "debtlens/bpe_tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debtlens/common.hpp"
#include "debtlens/unicode.hpp"

namespace debtlens {

namespace {

using unicode::is_letter;
using unicode::is_number;
using unicode::is_space;

// GPT-2 byte -> printable code point table.
const std::array<std::string, 256>& byte_symbols() {
  static const std::array<std::string, 256> table = [] {
    std::array<std::string, 256> t;
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[static_cast<std::size_t>(b)] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[static_cast<std::size_t>(b)] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[static_cast<std::size_t>(b)] = true;
    char32_t next = 256;
    for (std::size_t b = 0; b < 256; ++b) {
      char32_t cp = direct[b] ? static_cast<char32_t>(b) : next++;
      unicode::append_utf8(t[b], cp);
    }
    return t;
  }();
  return table;
}

// Splits text like the GPT-2 pattern
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
std::vector<std::u32string> pre_tokenize(const std::u32string& s) {
  std::vector<std::u32string> out;
  const std::size_t n = s.size();
  auto other = [](char32_t c) { return !is_space(c) && !is_letter(c) && !is_number(c); };
  std::size_t i = 0;
  while (i < n) {
    if (s[i] == U'\'') {
      bool matched = false;
      for (std::u32string_view suf : {U"s", U"t", U"re", U"ve", U"m", U"ll", U"d"}) {
        if (n - i - 1 >= suf.size() && std::u32string_view(s).substr(i + 1, suf.size()) == suf) {
          out.emplace_back(s.substr(i, suf.size() + 1));
          i += suf.size() + 1;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    const std::size_t k = (s[i] == U' ' && i + 1 < n) ? i + 1 : i;
    bool (*cls)(char32_t) = nullptr;
    if (k < n && is_letter(s[k])) cls = is_letter;
    else if (k < n && is_number(s[k])) cls = is_number;
    if (cls != nullptr && (k > i || cls(s[i]))) {
      std::size_t end = k;
      while (end < n && cls(s[end])) ++end;
      out.emplace_back(s.substr(i, end - i));
      i = end;
      continue;
    }
    if (k < n && other(s[k])) {
      std::size_t end = k;
      while (end < n && other(s[end])) ++end;
      out.emplace_back(s.substr(i, end - i));
      i = end;
      continue;
    }
    std::size_t end = i;
    while (end < n && is_space(s[end])) ++end;
    if (end < n && end - i >= 2) --end;  // leave one space to prefix the next word
    out.emplace_back(s.substr(i, end - i));
    i = end;
  }
  return out;
}

}  // namespace

ByteLevelBpeTokenizer ByteLevelBpeTokenizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing tokenizer config: '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const LoadError& e) {
    throw LoadError("tokenizer config '" + path.string() + "': " + e.what());
  }
}

ByteLevelBpeTokenizer ByteLevelBpeTokenizer::from_json(std::string_view json_text) {
  using nlohmann::json;
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw LoadError("not a JSON object");
  ByteLevelBpeTokenizer tok;
  try {
    const auto& model = j.at("model");
    if (model.value("type", "") != "BPE") throw LoadError("model type must be BPE");
    for (const auto& [piece, id] : model.at("vocab").items()) tok.vocab_[piece] = id.get<std::int64_t>();
    std::size_t rank = 0;
    for (const auto& m : model.at("merges")) {
      std::pair<std::string, std::string> pair;
      if (m.is_string()) {
        const auto s = m.get<std::string>();
        const auto sp = s.find(' ');
        if (sp == std::string::npos) throw LoadError("malformed merge rule '" + s + "'");
        pair = {s.substr(0, sp), s.substr(sp + 1)};
      } else if (m.is_array() && m.size() == 2) {
        pair = {m[0].get<std::string>(), m[1].get<std::string>()};
      } else {
        throw LoadError("malformed merge rule");
      }
      tok.merge_ranks_.emplace(std::move(pair), rank++);
    }
    if (model.contains("unk_token") && model["unk_token"].is_string()) {
      auto it = tok.vocab_.find(model["unk_token"].get<std::string>());
      if (it != tok.vocab_.end()) tok.unk_id_ = it->second;
    }

    if (j.contains("normalizer") && !j["normalizer"].is_null())
      throw LoadError("unsupported normalizer '" + j["normalizer"].value("type", "?") + "'");
    const auto& pre = j.at("pre_tokenizer");
    if (pre.is_null() || pre.value("type", "") != "ByteLevel")
      throw LoadError("unsupported pre_tokenizer (ByteLevel required)");
    if (!pre.value("use_regex", true)) throw LoadError("ByteLevel pre_tokenizer without regex is unsupported");
    tok.add_prefix_space_ = pre.value("add_prefix_space", false);

    if (j.contains("added_tokens"))
      for (const auto& a : j["added_tokens"])
        tok.added_tokens_.emplace_back(a.at("content").get<std::string>(), a.at("id").get<std::int64_t>());
    std::stable_sort(tok.added_tokens_.begin(), tok.added_tokens_.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

    const auto& post = j.value("post_processor", json());
    if (!post.is_null()) {
      const auto type = post.value("type", "");
      if (type != "RobertaProcessing" && type != "BertProcessing")
        throw LoadError("unsupported post_processor '" + type + "'");
      tok.cls_id_ = post.at("cls").at(1).get<std::int64_t>();
      tok.sep_id_ = post.at("sep").at(1).get<std::int64_t>();
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed tokenizer config: ") + e.what());
  }
  if (tok.vocab_.empty()) throw LoadError("empty vocabulary");
  return tok;
}

std::vector<std::string> ByteLevelBpeTokenizer::bpe(const std::string& word) const {
  // word is a sequence of byte symbols; start with one symbol per byte.
  const auto& table = byte_symbols();
  std::vector<std::string> parts;
  for (unsigned char b : word) parts.push_back(table[b]);
  while (parts.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = merge_ranks_.find({parts[i], parts[i + 1]});
      if (it != merge_ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string left = parts[best_at], right = parts[best_at + 1];
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < parts.size();) {
      if (i + 1 < parts.size() && parts[i] == left && parts[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(parts[i++]);
      }
    }
    parts = std::move(merged);
  }
  return parts;
}

std::vector<std::string> ByteLevelBpeTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  std::u32string cps = unicode::decode(text);
  if (add_prefix_space_ && !cps.empty() && cps.front() != U' ') cps.insert(cps.begin(), U' ');
  for (const auto& piece : pre_tokenize(cps)) {
    auto parts = bpe(unicode::encode(piece));
    out.insert(out.end(), parts.begin(), parts.end());
  }
  return out;
}

void ByteLevelBpeTokenizer::encode_plain(std::string_view text, std::vector<std::int64_t>& out) const {
  for (const auto& piece : tokenize(text)) {
    auto it = vocab_.find(piece);
    if (it != vocab_.end()) out.push_back(it->second);
    else if (unk_id_ >= 0) out.push_back(unk_id_);
  }
}

std::vector<std::int64_t> ByteLevelBpeTokenizer::encode(std::string_view text,
                                                        std::size_t max_length) const {
  const bool specials = cls_id_ >= 0 && sep_id_ >= 0;
  const std::size_t reserved = specials ? 2 : 0;
  if (max_length <= reserved) throw ArgumentError("max_length too small for special tokens");

  std::vector<std::int64_t> content;
  // Added tokens are matched verbatim before pre-tokenization.
  std::size_t pos = 0, seg = 0;
  while (pos < text.size()) {
    bool hit = false;
    for (const auto& [tok, id] : added_tokens_) {
      if (!tok.empty() && text.substr(pos, tok.size()) == tok) {
        encode_plain(text.substr(seg, pos - seg), content);
        content.push_back(id);
        pos += tok.size();
        seg = pos;
        hit = true;
        break;
      }
    }
    if (!hit) ++pos;
  }
  encode_plain(text.substr(seg), content);

  if (content.size() > max_length - reserved) content.resize(max_length - reserved);
  std::vector<std::int64_t> ids;
  ids.reserve(content.size() + reserved);
  if (specials) ids.push_back(cls_id_);
  ids.insert(ids.end(), content.begin(), content.end());
  if (specials) ids.push_back(sep_id_);
  return ids;
}

}  // namespace debtlens
