#include "msnt/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "msnt/errors.hpp"
#include "msnt/ops.hpp"

namespace msnt {

void MaskingConfig::validate() const {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw ConfigError("masking: mask_rate must lie in (0, 1)");
  }
  if (replace_with_mask < 0.0 || replace_with_random < 0.0 || keep_original < 0.0 ||
      std::abs(replace_with_mask + replace_with_random + keep_original - 1.0) > 1e-12) {
    throw ConfigError("masking: corruption split must be nonnegative and sum to 1");
  }
}

std::size_t masked_count(std::size_t maskable, double rate) {
  if (maskable == 0) return 0;
  const auto n = static_cast<std::size_t>(std::llround(rate * static_cast<double>(maskable)));
  return std::clamp<std::size_t>(n, 1, maskable);
}

std::optional<MlmInstance> make_mlm_instance(const TokenizedExample& example,
                                             const MaskingConfig& config, std::size_t vocab_size,
                                             Rng& rng) {
  config.validate();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < example.length(); ++i) {
    if (example.attention_mask[i] == 1 && !Vocab::is_special(example.token_ids[i])) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) return std::nullopt;
  if (vocab_size <= kNumSpecialTokens) throw ConfigError("masking: vocabulary has no regular tokens");

  // Partial Fisher-Yates: the first k entries are a uniform sample.
  const std::size_t k = masked_count(candidates.size(), config.mask_rate);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(candidates[i], candidates[i + rng.uniform_index(candidates.size() - i)]);
  }
  std::vector<std::size_t> positions(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(positions.begin(), positions.end());

  MlmInstance inst;
  inst.token_ids = example.token_ids;
  for (std::size_t pos : positions) {
    inst.positions.push_back(pos);
    inst.targets.push_back(example.token_ids[pos]);
    const double u = rng.uniform();
    if (u < config.replace_with_mask) {
      inst.token_ids[pos] = kMaskId;
      inst.actions.push_back(MaskAction::mask);
    } else if (u < config.replace_with_mask + config.replace_with_random) {
      inst.token_ids[pos] = kNumSpecialTokens + rng.uniform_index(vocab_size - kNumSpecialTokens);
      inst.actions.push_back(MaskAction::random_token);
    } else {
      inst.actions.push_back(MaskAction::keep);
    }
  }
  return inst;
}

std::optional<MlmInstance> mask_for_epoch(const TokenizedExample& example,
                                          const MaskingConfig& config, std::size_t vocab_size,
                                          std::size_t index, std::size_t epoch) {
  const std::uint64_t base =
      config.mode == MaskingMode::dynamic_masking ? config.seed ^ static_cast<std::uint64_t>(epoch)
                                                  : config.seed;
  Rng rng(derive_seed(base, index, 0x6d6c6d));
  return make_mlm_instance(example, config, vocab_size, rng);
}

Corpus parse_corpus(std::string_view text) {
  Corpus corpus;
  Document current;
  std::istringstream in{std::string(text)};
  std::string line;
  auto flush = [&] {
    if (!current.sentences.empty()) corpus.push_back(std::move(current));
    current = Document{};
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      flush();
    } else {
      current.sentences.push_back(line);
    }
  }
  flush();
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::vector<std::string> corpus_sentences(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const Document& d : corpus) out.insert(out.end(), d.sentences.begin(), d.sentences.end());
  return out;
}

std::vector<PairInstance> make_pair_batch(const Corpus& corpus, PairObjective objective,
                                          std::size_t count, const Vocab& vocab,
                                          std::size_t max_len, Rng& rng) {
  if (objective == PairObjective::none) throw ConfigError("make_pair_batch: no pair objective");
  if (corpus.size() < 2) throw DataError("pair corpus needs at least 2 documents");
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].sentences.size() < 2) {
      throw DataError("pair corpus document " + std::to_string(d) + " has fewer than 2 sentences");
    }
  }
  std::vector<PairInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t doc = rng.uniform_index(corpus.size());
    const auto& sentences = corpus[doc].sentences;
    const std::size_t at = rng.uniform_index(sentences.size() - 1);
    PairInstance p;
    p.objective = objective;
    p.positive = rng.bernoulli(0.5);
    p.first_document = doc;
    p.second_document = doc;
    if (p.positive) {
      p.first = sentences[at];
      p.second = sentences[at + 1];
    } else if (objective == PairObjective::sop) {
      p.first = sentences[at + 1];
      p.second = sentences[at];
    } else {
      std::size_t other = rng.uniform_index(corpus.size() - 1);
      if (other >= doc) ++other;
      const auto& pool = corpus[other].sentences;
      p.first = sentences[at];
      p.second = pool[rng.uniform_index(pool.size())];
      p.second_document = other;
    }
    p.example = encode_pair(vocab, p.first, p.second, max_len);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

struct PretrainExample {
  TokenizedExample example;
  // Pair label index: 1 = in order / subsequent, 0 = negative.
  std::size_t pair_label = 0;
};

std::vector<PretrainExample> build_pool(const SentimentModel& model, const Vocab& vocab,
                                        const Corpus& corpus, const MaskingConfig& masking,
                                        std::size_t max_len) {
  std::vector<PretrainExample> pool;
  const PairObjective objective = model.variant.pair_objective;
  if (objective == PairObjective::none) {
    for (const std::string& s : corpus_sentences(corpus)) {
      pool.push_back({encode_single(vocab, s, max_len), 0});
    }
    return pool;
  }
  std::size_t adjacent = 0;
  for (const Document& d : corpus) adjacent += d.sentences.size() - 1;
  Rng rng(derive_seed(masking.seed, 0x70616972));
  for (PairInstance& p : make_pair_batch(corpus, objective, adjacent, vocab, max_len, rng)) {
    pool.push_back({std::move(p.example), p.positive ? 1u : 0u});
  }
  return pool;
}

}  // namespace

PretrainResult pretrain(SentimentModel& model, const Vocab& vocab, const Corpus& corpus,
                        const MaskingConfig& masking, const PretrainOptions& options) {
  masking.validate();
  if (masking.mode != model.variant.masking_mode) {
    throw ConfigError("pretrain: masking mode does not match variant " +
                      std::string(to_string(model.variant.name)));
  }
  if (model.config.vocab_size != vocab.size()) {
    throw ConfigError("pretrain: model vocab_size " + std::to_string(model.config.vocab_size) +
                      " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  if (options.batch_size == 0) throw ConfigError("pretrain: batch_size must be positive");
  const std::size_t max_len = std::min(options.max_len, model.config.max_seq_len);

  PretrainResult result;
  if (options.steps == 0) return result;

  const std::vector<PretrainExample> examples = build_pool(model, vocab, corpus, masking, max_len);
  if (examples.empty()) throw DataError("pretrain: corpus produced no examples");
  const bool with_pair = model.variant.pair_objective != PairObjective::none;

  model.set_trainable(true);
  Adam adam(model.parameters(), options.optimizer);
  Rng dropout_rng(derive_seed(masking.seed, 0x64726f70));

  std::vector<std::size_t> order(examples.size());
  std::size_t cursor = order.size();
  std::size_t epoch = 0;
  std::size_t step = 0;
  while (step < options.steps) {
    if (cursor >= order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(derive_seed(masking.seed, epoch, 0x73687566));
      shuffle_rng.shuffle(std::span<std::size_t>(order));
      cursor = 0;
      ++epoch;
      result.epochs_started = epoch;
    }
    const std::size_t end = std::min(order.size(), cursor + options.batch_size);

    std::vector<TokenizedExample> corrupted;
    std::vector<std::size_t> pair_labels;
    std::vector<std::pair<std::size_t, std::size_t>> masked;  // (batch row, position)
    std::vector<std::size_t> targets;
    for (std::size_t i = cursor; i < end; ++i) {
      const PretrainExample& src = examples[order[i]];
      TokenizedExample ex = src.example;
      if (auto inst = mask_for_epoch(src.example, masking, vocab.size(), order[i], epoch - 1)) {
        ex.token_ids = inst->token_ids;
        for (std::size_t j = 0; j < inst->positions.size(); ++j) {
          masked.emplace_back(corrupted.size(), inst->positions[j]);
          targets.push_back(inst->targets[j]);
        }
      }
      corrupted.push_back(std::move(ex));
      pair_labels.push_back(src.pair_label);
    }
    cursor = end;

    const Batch batch = make_batch(corrupted, true);
    std::vector<std::size_t> flat;
    flat.reserve(masked.size());
    for (const auto& [row, pos] : masked) flat.push_back(row * batch.seq_len + pos);

    Tape tape;
    ForwardOptions fwd{.training = true, .rng = &dropout_rng};
    const Tensor hidden = encode_batch(model, batch, fwd);
    Tensor loss;
    double mlm_value = 0.0, pair_value = 0.0;
    if (!flat.empty()) {
      const Tensor mlm_loss = cross_entropy(mlm_logits(model, hidden, flat), targets);
      mlm_value = mlm_loss.item();
      loss = mlm_loss;
    }
    if (with_pair) {
      const Tensor pooled = pool(model, hidden, batch);
      const Tensor pair_loss = cross_entropy(pair_logits(model, pooled), pair_labels);
      pair_value = pair_loss.item();
      loss = loss.defined() ? add(loss, pair_loss) : pair_loss;
    }
    if (loss.defined()) {
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
    }
    result.loss_trace.push_back(mlm_value + pair_value);
    result.mlm_loss_trace.push_back(mlm_value);
    result.pair_loss_trace.push_back(pair_value);
    ++step;
  }
  return result;
}

}  // namespace msnt
