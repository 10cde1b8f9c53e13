#include "msnt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "msnt/errors.hpp"

namespace msnt {

namespace {

constexpr std::size_t kMaxWordChars = 100;

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return kSpecials;
}

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }
bool is_ascii_space(unsigned char c) { return c < 0x80 && std::isspace(c) != 0; }

bool looks_opaque(std::string_view token) {
  if (token.find("://") != std::string_view::npos) return true;
  if (token.rfind("www.", 0) == 0) return true;
  return token.size() >= 2 && token.front() == '`' && token.back() == '`';
}

// Byte offsets of UTF-8 code point starts, plus the end offset.
std::vector<std::size_t> codepoint_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if ((c & 0xC0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(s.size());
  return offsets;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < kNumSpecialTokens ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw DataError("vocab must start with [PAD] [UNK] [CLS] [SEP] [MASK]");
  }
  Vocab v;
  for (std::size_t id = 0; id < tokens.size(); ++id) {
    if (tokens[id].empty()) throw DataError("vocab line " + std::to_string(id) + " is empty");
    if (!v.token_to_id_.emplace(tokens[id], id).second) {
      throw DataError("duplicate vocab token '" + tokens[id] + "' at line " + std::to_string(id));
    }
  }
  v.id_to_token_ = std::move(tokens);
  return v;
}

Vocab Vocab::with_specials(std::span<const std::string> pieces) {
  std::vector<std::string> tokens = special_tokens();
  tokens.insert(tokens.end(), pieces.begin(), pieces.end());
  return from_tokens(std::move(tokens));
}

Vocab Vocab::parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.emplace_back(line);
    start = end + 1;
  }
  return from_tokens(std::move(tokens));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocab file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file " + path.string());
  out << serialize();
}

std::string Vocab::serialize() const {
  std::string out;
  for (const std::string& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::uint64_t Vocab::hash() const { return fnv1a64(serialize()); }

std::optional<std::size_t> Vocab::find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

bool Vocab::is_whole_word(std::size_t id) const {
  return !is_special(id) && id < size() && id_to_token_[id].rfind(kPieceContinuation, 0) != 0;
}

std::vector<std::string> basic_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string chunk(text.substr(i, j - i));
    std::transform(chunk.begin(), chunk.end(), chunk.begin(), [](unsigned char c) {
      return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    });
    if (looks_opaque(chunk)) {
      out.push_back(std::move(chunk));
    } else {
      std::string word;
      for (char c : chunk) {
        if (is_ascii_punct(static_cast<unsigned char>(c))) {
          if (!word.empty()) out.push_back(std::move(word));
          word.clear();
          out.emplace_back(1, c);
        } else {
          word += c;
        }
      }
      if (!word.empty()) out.push_back(std::move(word));
    }
    i = j;
  }
  return out;
}

std::vector<std::size_t> wordpiece(const Vocab& vocab, std::string_view word) {
  const auto offsets = codepoint_offsets(word);
  const std::size_t chars = offsets.size() - 1;
  if (chars == 0) return {};
  if (chars > kMaxWordChars) return {kUnkId};
  std::vector<std::size_t> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < chars) {
    std::size_t end = chars;
    std::optional<std::size_t> found;
    while (end > start) {
      candidate.clear();
      if (start > 0) candidate = kPieceContinuation;
      candidate.append(word.substr(offsets[start], offsets[end] - offsets[start]));
      found = vocab.find(candidate);
      if (found) break;
      --end;
    }
    if (!found) return {kUnkId};
    pieces.push_back(*found);
    start = end;
  }
  return pieces;
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size,
                  std::size_t min_frequency) {
  if (max_size <= kNumSpecialTokens) {
    throw ConfigError("build_vocab: max_size must exceed the 5 special tokens");
  }
  if (min_frequency < 1) throw ConfigError("build_vocab: min_frequency must be at least 1");

  std::map<std::string, std::size_t> word_counts;
  for (const std::string& line : corpus) {
    for (std::string& w : basic_tokenize(line)) ++word_counts[std::move(w)];
  }
  if (word_counts.empty()) throw DataError("build_vocab: corpus is empty");

  std::map<std::string, std::size_t> char_counts;
  std::map<std::string, std::size_t> suffix_counts;
  for (const auto& [word, count] : word_counts) {
    const auto offsets = codepoint_offsets(word);
    const std::size_t chars = offsets.size() - 1;
    if (chars > kMaxWordChars) continue;
    for (std::size_t c = 0; c < chars; ++c) {
      std::string piece = c == 0 ? std::string() : std::string(kPieceContinuation);
      piece.append(word, offsets[c], offsets[c + 1] - offsets[c]);
      char_counts[piece] += count;
    }
    if (count < min_frequency) {
      for (std::size_t c = 1; c + 1 < chars; ++c) {
        std::string piece(kPieceContinuation);
        piece.append(word, offsets[c], word.size() - offsets[c]);
        suffix_counts[piece] += count;
      }
    }
  }

  using Entry = std::pair<std::string, std::size_t>;
  auto ranked = [](const std::map<std::string, std::size_t>& counts) {
    std::vector<Entry> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(),
                     [](const Entry& a, const Entry& b) { return a.second > b.second; });
    return v;
  };

  std::vector<std::string> pieces;
  std::unordered_map<std::string, bool> seen;
  auto add = [&](const std::string& piece) {
    if (kNumSpecialTokens + pieces.size() >= max_size) return;
    if (seen.emplace(piece, true).second) pieces.push_back(piece);
  };
  for (const auto& [piece, _] : ranked(char_counts)) add(piece);
  for (const auto& [word, count] : ranked(word_counts)) {
    if (count >= min_frequency) add(word);
  }
  for (const auto& [piece, _] : ranked(suffix_counts)) add(piece);
  return Vocab::with_specials(pieces);
}

std::size_t TokenizedExample::real_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1u));
}

namespace {

struct Pieces {
  std::vector<std::size_t> ids;
  std::vector<int> words;
};

Pieces segment_text(const Vocab& vocab, std::string_view text, int word_offset) {
  Pieces out;
  const auto words = basic_tokenize(text);
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t id : wordpiece(vocab, words[w])) {
      out.ids.push_back(id);
      out.words.push_back(word_offset + static_cast<int>(w));
    }
  }
  return out;
}

void append(TokenizedExample& ex, std::size_t id, std::size_t segment, int word) {
  ex.token_ids.push_back(id);
  ex.segment_ids.push_back(segment);
  ex.attention_mask.push_back(1);
  ex.word_index.push_back(word);
}

void pad_to(TokenizedExample& ex, std::size_t max_len, std::size_t segment) {
  while (ex.token_ids.size() < max_len) {
    ex.token_ids.push_back(kPadId);
    ex.segment_ids.push_back(segment);
    ex.attention_mask.push_back(0);
    ex.word_index.push_back(-1);
  }
}

}  // namespace

TokenizedExample encode_single(const Vocab& vocab, std::string_view text, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("encode_single: max_len must be at least 3");
  Pieces p = segment_text(vocab, text, 0);
  const std::size_t keep = std::min(p.ids.size(), max_len - 2);
  TokenizedExample ex;
  append(ex, kClsId, 0, -1);
  for (std::size_t i = 0; i < keep; ++i) append(ex, p.ids[i], 0, p.words[i]);
  append(ex, kSepId, 0, -1);
  pad_to(ex, max_len, 0);
  return ex;
}

TokenizedExample encode_pair(const Vocab& vocab, std::string_view text_a, std::string_view text_b,
                             std::size_t max_len) {
  if (max_len < 5) throw ConfigError("encode_pair: max_len must be at least 5");
  Pieces a = segment_text(vocab, text_a, 0);
  const int b_offset = static_cast<int>(basic_tokenize(text_a).size());
  Pieces b = segment_text(vocab, text_b, b_offset);
  const std::size_t budget = max_len - 3;
  std::size_t len_a = a.ids.size(), len_b = b.ids.size();
  while (len_a + len_b > budget) {
    if (len_a > len_b) {
      --len_a;
    } else {
      --len_b;
    }
  }
  TokenizedExample ex;
  append(ex, kClsId, 0, -1);
  for (std::size_t i = 0; i < len_a; ++i) append(ex, a.ids[i], 0, a.words[i]);
  append(ex, kSepId, 0, -1);
  for (std::size_t i = 0; i < len_b; ++i) append(ex, b.ids[i], 1, b.words[i]);
  append(ex, kSepId, 1, -1);
  pad_to(ex, max_len, 1);
  return ex;
}

std::string decode(const Vocab& vocab, std::span<const std::size_t> ids) {
  std::string out;
  for (std::size_t id : ids) {
    if (Vocab::is_special(id)) continue;
    const std::string& t = vocab.token(id);
    if (t.rfind(kPieceContinuation, 0) == 0 && !out.empty()) {
      out.append(t, kPieceContinuation.size(), std::string::npos);
    } else {
      if (!out.empty()) out += ' ';
      out += t;
    }
  }
  return out;
}

}  // namespace msnt
