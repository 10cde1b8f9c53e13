#pragma once

// Linearly separable toy sentiment task: filler words plus one marker word
// naming the class.

#include <string>
#include <vector>

#include "msnt/dataset.hpp"
#include "msnt/model.hpp"
#include "msnt/random.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt::testing {

struct ToyTask {
  Vocab vocab;
  std::vector<LabeledExample> data;
};

inline ToyTask toy_task(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> markers = {"broken", "meh", "great"};
  const std::vector<std::string> filler = {"the", "api", "build", "docs", "test", "merge", "code"};
  std::vector<std::string> pieces = filler;
  pieces.insert(pieces.end(), markers.begin(), markers.end());
  ToyTask t{Vocab::with_specials(pieces), {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 3;
    std::vector<std::string> words;
    const std::size_t len = 2 + rng.uniform_index(5);
    for (std::size_t k = 0; k < len; ++k) words.push_back(filler[rng.uniform_index(filler.size())]);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(len + 1)), markers[c]);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    t.data.push_back({text, sentiment_from_index(c), i});
  }
  return t;
}

inline SentimentModel toy_model(const Vocab& v, std::uint64_t seed, std::size_t layers = 2) {
  EncoderConfig c;
  c.num_layers = layers;
  // Smaller encoders trained from scratch tend to collapse two of the three
  // classes onto one representation.
  c.hidden_size = 64;
  c.num_heads = 4;
  c.ff_size = 128;
  c.vocab_size = v.size();
  c.max_seq_len = 16;
  c.dropout_rate = 0.1;
  SentimentModel m = init_model(c, VariantSpec::of(VariantName::bertlike), seed);
  m.vocab_hash = v.hash();
  return m;
}

}  // namespace msnt::testing
