#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "msnt/errors.hpp"
#include "msnt/ops.hpp"
#include "msnt/pretrain.hpp"
#include "msnt/synthetic.hpp"

namespace msnt {
namespace {

TokenizedExample plain_example(std::size_t maskable, std::size_t max_len) {
  TokenizedExample ex;
  auto push = [&](std::size_t id, std::size_t mask) {
    ex.token_ids.push_back(id);
    ex.segment_ids.push_back(0);
    ex.attention_mask.push_back(mask);
    ex.word_index.push_back(-1);
  };
  push(kClsId, 1);
  for (std::size_t i = 0; i < maskable; ++i) push(kNumSpecialTokens + i % 20, 1);
  push(kSepId, 1);
  while (ex.length() < max_len) push(kPadId, 0);
  return ex;
}

Corpus toy_corpus(std::size_t sentences, std::uint64_t seed) {
  Corpus docs = generate_synthetic_corpus(sentences, seed);
  Corpus out;
  std::size_t n = 0;
  for (auto& d : docs) {
    if (n >= sentences) break;
    if (d.sentences.size() > sentences - n) d.sentences.resize(std::max<std::size_t>(2, sentences - n));
    n += d.sentences.size();
    out.push_back(std::move(d));
  }
  return out;
}

Vocab vocab_for(const Corpus& corpus) {
  return build_vocab(corpus_sentences(corpus), 400, 1);
}

SentimentModel small_model(const Vocab& v, VariantName name, std::size_t hidden, std::uint64_t seed) {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden_size = hidden;
  c.num_heads = 2;
  c.ff_size = 2 * hidden;
  c.vocab_size = v.size();
  c.max_seq_len = 32;
  c.dropout_rate = 0.0;
  const VariantSpec spec = VariantSpec::of(name);
  c.share_parameters = spec.share_parameters;
  return init_model(c, spec, seed);
}

TEST(Masking, CountRule) {
  EXPECT_EQ(masked_count(20, 0.15), 3u);
  EXPECT_EQ(masked_count(1, 0.15), 1u);
  EXPECT_EQ(masked_count(0, 0.15), 0u);
  Rng rng(1);
  MaskingConfig cfg;
  const auto inst = make_mlm_instance(plain_example(20, 30), cfg, 100, rng);
  ASSERT_TRUE(inst.has_value());
  EXPECT_EQ(inst->positions.size(), 3u);
  const auto one = make_mlm_instance(plain_example(1, 30), cfg, 100, rng);
  ASSERT_TRUE(one.has_value());
  EXPECT_EQ(one->positions.size(), 1u);
  EXPECT_FALSE(make_mlm_instance(plain_example(0, 30), cfg, 100, rng).has_value());
}

TEST(Masking, ConfigValidation) {
  MaskingConfig cfg;
  cfg.mask_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = MaskingConfig{};
  cfg.replace_with_mask = 0.7;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Masking, StatisticsOverManyTokens) {
  Rng rng(2);
  MaskingConfig cfg;
  std::size_t maskable = 0, masked = 0, mask = 0, random = 0, keep = 0;
  while (masked < 12'000) {
    const std::size_t n = 10 + rng.uniform_index(40);
    const TokenizedExample ex = plain_example(n, 64);
    const auto inst = make_mlm_instance(ex, cfg, 200, rng);
    ASSERT_TRUE(inst.has_value());
    maskable += n;
    masked += inst->positions.size();
    for (std::size_t j = 0; j < inst->positions.size(); ++j) {
      const std::size_t pos = inst->positions[j];
      EXPECT_FALSE(Vocab::is_special(ex.token_ids[pos]));
      EXPECT_EQ(inst->targets[j], ex.token_ids[pos]);
      switch (inst->actions[j]) {
        case MaskAction::mask:
          ++mask;
          EXPECT_EQ(inst->token_ids[pos], kMaskId);
          break;
        case MaskAction::random_token:
          ++random;
          EXPECT_GE(inst->token_ids[pos], kNumSpecialTokens);
          EXPECT_LT(inst->token_ids[pos], 200u);
          break;
        case MaskAction::keep:
          ++keep;
          EXPECT_EQ(inst->token_ids[pos], ex.token_ids[pos]);
          break;
      }
    }
  }
  EXPECT_GE(maskable, 10'000u);
  const double rate = double(masked) / double(maskable);
  EXPECT_NEAR(rate, 0.15, 0.01);
  EXPECT_NEAR(double(mask) / double(masked), 0.80, 0.02);
  EXPECT_NEAR(double(random) / double(masked), 0.10, 0.02);
  EXPECT_NEAR(double(keep) / double(masked), 0.10, 0.02);
}

TEST(Masking, DynamicDiffersAcrossEpochsStaticDoesNot) {
  const TokenizedExample ex = plain_example(40, 64);
  MaskingConfig cfg;
  cfg.seed = 99;
  cfg.mode = MaskingMode::static_masking;
  for (std::size_t index = 0; index < 20; ++index) {
    EXPECT_EQ(mask_for_epoch(ex, cfg, 100, index, 0)->token_ids,
              mask_for_epoch(ex, cfg, 100, index, 1)->token_ids);
  }
  cfg.mode = MaskingMode::dynamic_masking;
  std::size_t differing = 0;
  for (std::size_t index = 0; index < 20; ++index) {
    const auto a = mask_for_epoch(ex, cfg, 100, index, 0);
    const auto b = mask_for_epoch(ex, cfg, 100, index, 1);
    differing += a->positions != b->positions;
    EXPECT_EQ(a->token_ids, mask_for_epoch(ex, cfg, 100, index, 0)->token_ids);
  }
  EXPECT_EQ(differing, 20u);
}

TEST(Pairs, NspPositiveRate) {
  const Corpus corpus = generate_synthetic_corpus(60, 3);
  const Vocab v = vocab_for(corpus);
  Rng rng(4);
  const auto pairs = make_pair_batch(corpus, PairObjective::nsp, 5000, v, 32, rng);
  const auto positives =
      std::count_if(pairs.begin(), pairs.end(), [](const PairInstance& p) { return p.positive; });
  EXPECT_NEAR(double(positives) / 5000.0, 0.5, 0.02);
  for (const auto& p : pairs) {
    if (!p.positive) continue;
    const auto& s = corpus[p.first_document].sentences;
    bool adjacent = false;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      adjacent = adjacent || (s[i] == p.first && s[i + 1] == p.second);
    }
    EXPECT_TRUE(adjacent);
  }
}

TEST(Pairs, SopNegativeSwaps) {
  const Corpus corpus = {Document{{"a", "b"}}, Document{{"c", "d"}}};
  const std::vector<std::string> pieces = {"a", "b", "c", "d"};
  const Vocab v = Vocab::with_specials(pieces);
  Rng rng(5);
  bool saw_ab_negative = false;
  for (const auto& p : make_pair_batch(corpus, PairObjective::sop, 200, v, 8, rng)) {
    if (p.positive) {
      EXPECT_TRUE((p.first == "a" && p.second == "b") || (p.first == "c" && p.second == "d"));
    } else {
      EXPECT_TRUE((p.first == "b" && p.second == "a") || (p.first == "d" && p.second == "c"));
      saw_ab_negative = saw_ab_negative || p.first == "b";
    }
  }
  EXPECT_TRUE(saw_ab_negative);
}

TEST(Pairs, NspNegativesComeFromOtherDocuments) {
  const Corpus corpus = {Document{{"a1", "a2", "a3"}}, Document{{"b1", "b2"}},
                         Document{{"c1", "c2", "c3", "c4"}}};
  std::vector<std::string> pieces;
  for (const auto& d : corpus) pieces.insert(pieces.end(), d.sentences.begin(), d.sentences.end());
  const Vocab v = Vocab::with_specials(pieces);
  auto doc_of = [&](const std::string& s) {
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      const auto& ss = corpus[d].sentences;
      if (std::find(ss.begin(), ss.end(), s) != ss.end()) return d;
    }
    return corpus.size();
  };
  Rng rng(6);
  // Enough draws to hit every (document, sentence) negative combination.
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : make_pair_batch(corpus, PairObjective::nsp, 20'000, v, 8, rng)) {
    if (p.positive) continue;
    EXPECT_NE(doc_of(p.first), doc_of(p.second));
    EXPECT_NE(p.first_document, p.second_document);
    seen.emplace(p.first, p.second);
  }
  std::size_t possible = 0;
  for (std::size_t d = 0; d < 3; ++d) {
    std::size_t others = 0;
    for (std::size_t e = 0; e < 3; ++e) others += e == d ? 0 : corpus[e].sentences.size();
    possible += (corpus[d].sentences.size() - 1) * others;
  }
  EXPECT_EQ(seen.size(), possible);
}

TEST(Pairs, DegenerateCorpusRejected) {
  const std::vector<std::string> pieces = {"a"};
  const Vocab v = Vocab::with_specials(pieces);
  Rng rng(7);
  EXPECT_THROW(make_pair_batch({Document{{"a", "a"}}}, PairObjective::nsp, 5, v, 8, rng), DataError);
  EXPECT_THROW(make_pair_batch({Document{{"a", "a"}}, Document{{"a"}}}, PairObjective::nsp, 5, v, 8, rng),
               DataError);
}

TEST(Corpus, ParseBlankLineSeparatesDocuments) {
  const Corpus c = parse_corpus("one\ntwo\n\nthree\nfour\n\n\nfive\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].sentences, (std::vector<std::string>{"one", "two"}));
  EXPECT_EQ(c[2].sentences, (std::vector<std::string>{"five"}));
}

TEST(Pretrain, FreshMlmLossNearLogVocab) {
  const Corpus corpus = toy_corpus(200, 8);
  const Vocab v = vocab_for(corpus);
  const SentimentModel m = small_model(v, VariantName::robertalike, 32, 1);
  MaskingConfig cfg;
  cfg.mode = MaskingMode::dynamic_masking;
  double total = 0.0;
  std::size_t n = 0;
  std::size_t index = 0;
  for (const auto& s : corpus_sentences(corpus)) {
    const TokenizedExample ex = encode_single(v, s, 32);
    const auto inst = mask_for_epoch(ex, cfg, v.size(), index++, 0);
    if (!inst) continue;
    TokenizedExample corrupted = ex;
    corrupted.token_ids = inst->token_ids;
    const Tensor logits = mlm_logits(m, corrupted, inst->positions);
    total += cross_entropy(logits, inst->targets).item() * double(inst->positions.size());
    n += inst->positions.size();
  }
  const double mean = total / double(n);
  EXPECT_NEAR(mean, std::log(double(v.size())), 0.1 * std::log(double(v.size())));
}

TEST(Pretrain, LossDecreasesOnToyCorpus) {
  const Corpus corpus = toy_corpus(50, 9);
  const Vocab v = vocab_for(corpus);
  SentimentModel m = small_model(v, VariantName::bertlike, 32, 2);
  MaskingConfig cfg;
  cfg.seed = 3;
  PretrainOptions opt;
  opt.steps = 300;
  opt.batch_size = 8;
  opt.max_len = 32;
  const PretrainResult r = pretrain(m, v, corpus, cfg, opt);
  ASSERT_EQ(r.mlm_loss_trace.size(), 300u);
  const double first = std::accumulate(r.mlm_loss_trace.begin(), r.mlm_loss_trace.begin() + 20, 0.0);
  const double last = std::accumulate(r.mlm_loss_trace.end() - 20, r.mlm_loss_trace.end(), 0.0);
  EXPECT_LT(last, first);
}

TEST(Pretrain, ZeroStepsLeavesModelUnchanged) {
  const Corpus corpus = toy_corpus(50, 10);
  const Vocab v = vocab_for(corpus);
  SentimentModel m = small_model(v, VariantName::albertlike, 16, 3);
  const SentimentModel before = m.clone();
  PretrainOptions opt;
  opt.steps = 0;
  const PretrainResult r = pretrain(m, v, corpus, MaskingConfig{}, opt);
  EXPECT_TRUE(r.loss_trace.empty());
  const auto a = m.parameters(), b = before.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin()));
  }
}

TEST(Pretrain, FixedSeedIsBitReproducible) {
  const Corpus corpus = toy_corpus(50, 11);
  const Vocab v = vocab_for(corpus);
  for (VariantName name : {VariantName::bertlike, VariantName::albertlike, VariantName::robertalike}) {
    MaskingConfig cfg;
    cfg.seed = 12;
    cfg.mode = VariantSpec::of(name).masking_mode;
    PretrainOptions opt;
    opt.steps = 15;
    opt.batch_size = 8;
    SentimentModel a = small_model(v, name, 16, 4);
    SentimentModel b = small_model(v, name, 16, 4);
    const auto ra = pretrain(a, v, corpus, cfg, opt);
    const auto rb = pretrain(b, v, corpus, cfg, opt);
    EXPECT_EQ(ra.loss_trace, rb.loss_trace);
    if (name == VariantName::robertalike) {
      EXPECT_TRUE(std::all_of(ra.pair_loss_trace.begin(), ra.pair_loss_trace.end(),
                              [](double x) { return x == 0.0; }));
    } else {
      EXPECT_GT(ra.pair_loss_trace.front(), 0.0);
    }
  }
}

TEST(Pretrain, MaskingModeMustMatchVariant) {
  const Corpus corpus = toy_corpus(50, 13);
  const Vocab v = vocab_for(corpus);
  SentimentModel m = small_model(v, VariantName::robertalike, 16, 5);
  MaskingConfig cfg;
  cfg.mode = MaskingMode::static_masking;
  EXPECT_THROW(pretrain(m, v, corpus, cfg, PretrainOptions{}), ConfigError);
}

}  // namespace
}  // namespace msnt
