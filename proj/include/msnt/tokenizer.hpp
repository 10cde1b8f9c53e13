#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace msnt {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kSepId = 3;
inline constexpr std::size_t kMaskId = 4;
inline constexpr std::size_t kNumSpecialTokens = 5;

inline constexpr std::string_view kPieceContinuation = "##";

// Subword inventory. Ids 0-4 are [PAD] [UNK] [CLS] [SEP] [MASK].
class Vocab {
 public:
  // `tokens` must start with the five special tokens and contain no duplicates.
  static Vocab from_tokens(std::vector<std::string> tokens);
  // Prepends the special tokens to `pieces`.
  static Vocab with_specials(std::span<const std::string> pieces);
  static Vocab load(const std::filesystem::path& path);
  static Vocab parse(std::string_view text);

  void save(const std::filesystem::path& path) const;
  // Vocab file bytes: one token per line, line number = id.
  std::string serialize() const;
  // 64-bit FNV-1a over serialize().
  std::uint64_t hash() const;

  std::size_t size() const { return id_to_token_.size(); }
  std::optional<std::size_t> find(std::string_view token) const;
  const std::string& token(std::size_t id) const { return id_to_token_.at(id); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  static bool is_special(std::size_t id) { return id < kNumSpecialTokens; }
  // True for non-special entries that do not start with "##".
  bool is_whole_word(std::size_t id) const;

 private:
  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Lowercases and splits on whitespace and ASCII punctuation. Tokens that look
// like URLs or `code literals` are kept whole.
std::vector<std::string> basic_tokenize(std::string_view text);

// Greedy longest-match segmentation of one basic token. Returns {UNK} when
// the word cannot be covered by vocabulary pieces.
std::vector<std::size_t> wordpiece(const Vocab& vocab, std::string_view word);

// Frequency-greedy inventory: every character needed to spell corpus words,
// then whole words with count >= min_frequency, then "##" suffixes of rarer
// words. Ties break lexicographically; the result has at most max_size entries.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size,
                  std::size_t min_frequency);

struct TokenizedExample {
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> segment_ids;
  std::vector<std::size_t> attention_mask;
  // Index of the basic token each position came from; -1 for specials and
  // padding. In a pair, segment-B words are numbered after segment-A words.
  std::vector<int> word_index;

  std::size_t length() const { return token_ids.size(); }
  // Count of non-PAD positions.
  std::size_t real_length() const;
};

// [CLS] text [SEP] then PAD up to max_len (max_len >= 3).
TokenizedExample encode_single(const Vocab& vocab, std::string_view text, std::size_t max_len);
// [CLS] a [SEP] b [SEP] with longest-first truncation (max_len >= 5).
TokenizedExample encode_pair(const Vocab& vocab, std::string_view text_a, std::string_view text_b,
                             std::size_t max_len);

// Joins pieces back into space-separated words, dropping special tokens.
std::string decode(const Vocab& vocab, std::span<const std::size_t> ids);

}  // namespace msnt
