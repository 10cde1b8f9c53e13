#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msnt/model.hpp"
#include "msnt/optim.hpp"
#include "msnt/random.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt {

struct MaskingConfig {
  double mask_rate = 0.15;
  // Corruption split for each selected position.
  double replace_with_mask = 0.8;
  double replace_with_random = 0.1;
  double keep_original = 0.1;
  MaskingMode mode = MaskingMode::static_masking;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class MaskAction : unsigned char { mask, random_token, keep };

struct MlmInstance {
  // Corrupted copy of the example's token ids.
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> positions;
  // Original ids at `positions`.
  std::vector<std::size_t> targets;
  std::vector<MaskAction> actions;
};

// max(1, round(rate * maskable)).
std::size_t masked_count(std::size_t maskable, double rate);

// Selects positions uniformly without replacement among non-special tokens and
// corrupts them. Returns nullopt when nothing is maskable.
std::optional<MlmInstance> make_mlm_instance(const TokenizedExample& example,
                                             const MaskingConfig& config, std::size_t vocab_size,
                                             Rng& rng);

// Masking for example `index` in pass `epoch`: static masking ignores the
// epoch, dynamic masking reseeds from seed XOR epoch.
std::optional<MlmInstance> mask_for_epoch(const TokenizedExample& example,
                                          const MaskingConfig& config, std::size_t vocab_size,
                                          std::size_t index, std::size_t epoch);

struct Document {
  std::vector<std::string> sentences;
};
using Corpus = std::vector<Document>;

// One sentence per line; blank lines separate documents.
Corpus parse_corpus(std::string_view text);
Corpus load_corpus(const std::filesystem::path& path);
std::vector<std::string> corpus_sentences(const Corpus& corpus);

struct PairInstance {
  TokenizedExample example;
  std::string first;
  std::string second;
  // True when `second` follows `first` in its document, in order.
  bool positive = true;
  PairObjective objective = PairObjective::nsp;
  std::size_t first_document = 0;
  std::size_t second_document = 0;
};

// Half positive pairs in expectation. NSP negatives take the second sentence
// from a different document; SOP negatives swap two consecutive sentences.
std::vector<PairInstance> make_pair_batch(const Corpus& corpus, PairObjective objective,
                                          std::size_t count, const Vocab& vocab,
                                          std::size_t max_len, Rng& rng);

struct PretrainOptions {
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  std::size_t max_len = 64;
  AdamOptions optimizer{.learning_rate = 1e-3, .clip_norm = 1.0};
};

struct PretrainResult {
  // Total loss per step (MLM plus pair objective when the variant has one).
  std::vector<double> loss_trace;
  std::vector<double> mlm_loss_trace;
  std::vector<double> pair_loss_trace;
  std::size_t epochs_started = 0;
};

// Masked-language-model pretraining, plus NSP or SOP as the variant dictates.
PretrainResult pretrain(SentimentModel& model, const Vocab& vocab, const Corpus& corpus,
                        const MaskingConfig& masking, const PretrainOptions& options);

}  // namespace msnt
