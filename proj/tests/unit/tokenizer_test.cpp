#include <gtest/gtest.h>

#include <algorithm>

#include "msnt/errors.hpp"
#include "msnt/random.hpp"
#include "msnt/synthetic.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt {
namespace {

Vocab small_vocab() {
  const std::vector<std::string> pieces = {"bug", "fix", "api", "good", "sent", "##iment",
                                           "sentiment", "a", "b", "c", "d"};
  return Vocab::with_specials(pieces);
}

bool invariants_hold(const TokenizedExample& ex) {
  const std::size_t n = ex.length();
  if (ex.segment_ids.size() != n || ex.attention_mask.size() != n || ex.word_index.size() != n)
    return false;
  if (std::count(ex.token_ids.begin(), ex.token_ids.end(), kSepId) > 2) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((ex.attention_mask[i] == 1) != (ex.token_ids[i] != kPadId)) return false;
    if (i > 0 && ex.segment_ids[i] < ex.segment_ids[i - 1]) return false;
    if (ex.token_ids[i] == kMaskId) return false;
  }
  return ex.token_ids[0] == kClsId;
}

TEST(BuildVocab, SmallCorpus) {
  const std::vector<std::string> corpus = {"bug bug fix"};
  const Vocab v = build_vocab(corpus, 100, 1);
  EXPECT_TRUE(v.find("bug").has_value());
  EXPECT_TRUE(v.find("fix").has_value());
  EXPECT_EQ(v.token(0), "[PAD]");
  EXPECT_EQ(v.token(4), "[MASK]");
}

TEST(BuildVocab, Errors) {
  const std::vector<std::string> empty;
  EXPECT_THROW(build_vocab(empty, 100, 1), DataError);
  const std::vector<std::string> corpus = {"x"};
  EXPECT_THROW(build_vocab(corpus, 5, 1), ConfigError);
  EXPECT_THROW(build_vocab(corpus, 100, 0), ConfigError);
}

TEST(BuildVocab, RoundTripOnSyntheticCorpus) {
  std::vector<std::string> sentences;
  for (const auto& doc : generate_synthetic_corpus(400, 5)) {
    for (const auto& s : doc.sentences) sentences.push_back(s);
  }
  sentences.resize(1000);
  const std::size_t bound = 300;
  const Vocab v = build_vocab(sentences, bound, 1);
  EXPECT_LE(v.size(), bound);
  const Vocab again = build_vocab(sentences, bound, 1);
  EXPECT_EQ(v.serialize(), again.serialize());
  for (std::size_t id = 0; id < v.size(); ++id) {
    EXPECT_EQ(v.find(v.token(id)), id);
    if (!v.is_whole_word(id)) continue;
    const TokenizedExample ex = encode_single(v, v.token(id), 16);
    for (std::size_t t : ex.token_ids) EXPECT_LT(t, v.size());
    std::vector<std::size_t> ids(ex.token_ids.begin(), ex.token_ids.end());
    EXPECT_EQ(decode(v, ids), v.token(id));
  }
}

TEST(Wordpiece, UnknownWordIsUnk) {
  const Vocab v = small_vocab();
  EXPECT_EQ(wordpiece(v, "zzz"), std::vector<std::size_t>{kUnkId});
}

TEST(Wordpiece, GreedyLongestMatch) {
  const Vocab v = small_vocab();
  EXPECT_EQ(wordpiece(v, "sentiment"), std::vector<std::size_t>{*v.find("sentiment")});
  const std::vector<std::string> pieces = {"sent", "##iment"};
  const Vocab split = Vocab::with_specials(pieces);
  EXPECT_EQ(wordpiece(split, "sentiment"),
            (std::vector<std::size_t>{*split.find("sent"), *split.find("##iment")}));
}

TEST(EncodeSingle, EmptyText) {
  const TokenizedExample ex = encode_single(small_vocab(), "", 6);
  EXPECT_EQ(ex.token_ids, (std::vector<std::size_t>{kClsId, kSepId, 0, 0, 0, 0}));
  EXPECT_EQ(ex.attention_mask, (std::vector<std::size_t>{1, 1, 0, 0, 0, 0}));
}

TEST(EncodeSingle, TruncateThenSep) {
  const TokenizedExample ex = encode_single(small_vocab(), "bug fix api good bug fix api", 5);
  ASSERT_EQ(ex.length(), 5u);
  EXPECT_EQ(ex.token_ids.front(), kClsId);
  EXPECT_EQ(ex.token_ids.back(), kSepId);
  EXPECT_EQ(ex.real_length(), 5u);
  EXPECT_THROW(encode_single(small_vocab(), "x", 2), ConfigError);
}

TEST(EncodePair, Segments) {
  const TokenizedExample ex = encode_pair(small_vocab(), "a", "b", 5);
  EXPECT_EQ(ex.segment_ids, (std::vector<std::size_t>{0, 0, 0, 1, 1}));
  const TokenizedExample padded = encode_pair(small_vocab(), "a", "b", 8);
  // Padding continues the last real segment.
  EXPECT_EQ(padded.segment_ids.back(), 1u);
}

TEST(EncodePair, LongestFirstTruncationBalances) {
  const TokenizedExample ex = encode_pair(small_vocab(), "a a a a a a a a", "b b b b b b b b", 11);
  const Vocab v = small_vocab();
  const auto na = std::count(ex.token_ids.begin(), ex.token_ids.end(), *v.find("a"));
  const auto nb = std::count(ex.token_ids.begin(), ex.token_ids.end(), *v.find("b"));
  EXPECT_EQ(na, nb);
  EXPECT_EQ(na + nb + 3, 11);
}

TEST(EncodePair, RandomPairsKeepInvariants) {
  const Vocab v = small_vocab();
  const std::vector<std::string> words = {"bug", "fix", "api", "good", "zz", "sentiment", "a"};
  Rng rng(11);
  auto sentence = [&] {
    std::string s;
    const std::size_t n = rng.uniform_index(12);
    for (std::size_t i = 0; i < n; ++i) s += words[rng.uniform_index(words.size())] + " ";
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    const std::size_t max_len = 5 + rng.uniform_index(20);
    const TokenizedExample ex = encode_pair(v, sentence(), sentence(), max_len);
    EXPECT_EQ(ex.length(), max_len);
    EXPECT_TRUE(invariants_hold(ex));
    const std::string text = sentence();
    const TokenizedExample single = encode_single(v, text, max_len);
    EXPECT_TRUE(invariants_hold(single));
    EXPECT_EQ(single.token_ids, encode_single(v, text, max_len).token_ids);
  }
}

TEST(BasicTokenize, LowercasesAndKeepsOpaqueTokens) {
  const auto t = basic_tokenize("Fix THE bug, see https://x.io/a?b=1 and `foo.bar()` now!");
  EXPECT_EQ(t.front(), "fix");
  EXPECT_NE(std::find(t.begin(), t.end(), "https://x.io/a?b=1"), t.end());
  EXPECT_NE(std::find(t.begin(), t.end(), "`foo.bar()`"), t.end());
  EXPECT_NE(std::find(t.begin(), t.end(), ","), t.end());
}

TEST(VocabFile, ParseRejectsBadHeaderAndDuplicates) {
  EXPECT_THROW(Vocab::parse("a\nb\n"), DataError);
  EXPECT_THROW(Vocab::parse("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\nx\nx\n"), DataError);
  const Vocab v = small_vocab();
  EXPECT_EQ(Vocab::parse(v.serialize()).serialize(), v.serialize());
  EXPECT_EQ(v.hash(), fnv1a64(v.serialize()));
}

}  // namespace
}  // namespace msnt
