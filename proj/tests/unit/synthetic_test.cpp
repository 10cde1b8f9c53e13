#include <gtest/gtest.h>

#include <array>
#include <set>

#include "msnt/errors.hpp"
#include "msnt/synthetic.hpp"
#include "oracles.hpp"

namespace msnt {
namespace {

TEST(Synthetic, SameSeedSameData) {
  const DatasetSplit a = generate_synthetic(300, 60, 5);
  const DatasetSplit b = generate_synthetic(300, 60, 5);
  const DatasetSplit c = generate_synthetic(300, 60, 6);
  ASSERT_EQ(a.train.size(), b.train.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].text, b.train[i].text);
    EXPECT_EQ(a.train[i].label, b.train[i].label);
    differs |= a.train[i].text != c.train[i].text;
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, BalancedUniqueAndSized) {
  const DatasetSplit s = generate_synthetic(3000, 600, 1);
  EXPECT_EQ(s.train.size(), 3000u);
  EXPECT_EQ(s.validation.size(), 333u);
  EXPECT_EQ(s.test.size(), 600u);
  std::set<std::string> texts;
  std::set<std::size_t> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    std::array<std::size_t, 3> counts{};
    for (const auto& ex : *part) {
      ++counts[index_of(ex.label)];
      EXPECT_TRUE(texts.insert(ex.text).second) << ex.text;
      EXPECT_TRUE(ids.insert(ex.id).second);
      EXPECT_FALSE(ex.text.empty());
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1u);
  }
}

TEST(Synthetic, NoiseFreeDataIsLinearlySeparable) {
  SyntheticOptions o;
  o.num_train = 600;
  o.num_test = 300;
  o.noise = 0.0;
  o.seed = 2;
  const DatasetSplit s = generate_synthetic(o);
  const auto markers = synthetic_marker_words();
  ASSERT_EQ(markers.size(), 3u);
  for (const auto& m : markers) EXPECT_FALSE(m.empty());
  EXPECT_EQ(testing::linear_probe_accuracy(s.train, s.test, markers), 1.0);
}

TEST(Synthetic, NoiseBleedsPhrasesAcrossClasses) {
  SyntheticOptions o;
  o.num_train = 3000;
  o.num_test = 30;
  o.noise = 0.2;
  o.seed = 3;
  const DatasetSplit s = generate_synthetic(o);
  const auto markers = synthetic_marker_words();
  std::size_t foreign = 0;
  for (const auto& ex : s.train) {
    const auto words = basic_tokenize(ex.text);
    bool own = false;
    for (const auto& w : words)
      for (const auto& m : markers[index_of(ex.label)]) own |= w == m;
    foreign += own ? 0 : 1;
  }
  // Roughly 20% of sentences, less the few bleeds whose phrase has no marker.
  EXPECT_GT(foreign, 400u);
  EXPECT_LT(foreign, 800u);
}

TEST(Synthetic, Errors) {
  EXPECT_THROW(generate_synthetic(10, 60, 0), ConfigError);
  SyntheticOptions o;
  o.noise = 1.0;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
  EXPECT_THROW(generate_synthetic_corpus(1, 0), ConfigError);
}

TEST(Synthetic, CorpusShape) {
  const Corpus c = generate_synthetic_corpus(50, 4);
  ASSERT_EQ(c.size(), 50u);
  for (const Document& d : c) {
    EXPECT_GE(d.sentences.size(), 2u);
    EXPECT_LE(d.sentences.size(), 5u);
  }
}

}  // namespace
}  // namespace msnt
