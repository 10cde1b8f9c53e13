#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msnt/labels.hpp"
#include "msnt/random.hpp"
#include "msnt/tensor.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 64;
  std::size_t num_heads = 4;
  std::size_t ff_size = 256;
  std::size_t vocab_size = 0;
  std::size_t max_seq_len = 64;
  double dropout_rate = 0.1;
  // One encoder block reused by every layer.
  bool share_parameters = false;
  // Token embedding width; 0 means hidden_size. A projection to hidden_size
  // is added when the widths differ.
  std::size_t embedding_size = 0;

  std::size_t embedding_width() const { return embedding_size == 0 ? hidden_size : embedding_size; }

  // Throws ConfigError on violated invariants.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

enum class VariantName : unsigned char { bertlike = 0, albertlike = 1, robertalike = 2 };
enum class PairObjective : unsigned char { nsp, sop, none };
enum class MaskingMode : unsigned char { static_masking, dynamic_masking };

struct VariantSpec {
  VariantName name = VariantName::bertlike;
  PairObjective pair_objective = PairObjective::nsp;
  MaskingMode masking_mode = MaskingMode::static_masking;
  bool share_parameters = false;

  static VariantSpec of(VariantName name);
  void validate() const;
  bool operator==(const VariantSpec&) const = default;
};

std::string_view to_string(VariantName name);
std::optional<VariantName> parse_variant(std::string_view text);
std::string_view to_string(PairObjective objective);

struct BlockParams {
  Tensor query_w, query_b, key_w, key_b, value_w, value_b, output_w, output_b;
  Tensor attn_norm_g, attn_norm_b;
  Tensor ff_in_w, ff_in_b, ff_out_w, ff_out_b;
  Tensor ff_norm_g, ff_norm_b;
};

// Which parameters a count covers.
enum class ParameterScope {
  all,
  // Embeddings, encoder, pooler and classification head: what inference needs.
  classifier,
  encoder_blocks,
};

class SentimentModel {
 public:
  SentimentModel() = default;
  SentimentModel(SentimentModel&&) = default;
  SentimentModel& operator=(SentimentModel&&) = default;
  SentimentModel(const SentimentModel&) = delete;
  SentimentModel& operator=(const SentimentModel&) = delete;

  EncoderConfig config;
  VariantSpec variant;
  std::array<Sentiment, kNumClasses> label_order = kLabelOrder;
  // FNV-1a hash of the vocab file this model was built against; 0 when unset.
  std::uint64_t vocab_hash = 0;

  Tensor token_embedding;     // [V x E]
  Tensor position_embedding;  // [P x E]
  Tensor segment_embedding;   // [2 x E]
  Tensor embedding_norm_g, embedding_norm_b;
  Tensor embedding_projection;  // [E x H], only when E != H
  std::vector<BlockParams> blocks;  // L entries, or 1 when shared
  Tensor pooler_w, pooler_b;
  Tensor classifier_w, classifier_b;  // [H x 3]
  Tensor mlm_dense_w, mlm_dense_b, mlm_norm_g, mlm_norm_b, mlm_output_b;
  Tensor pair_w, pair_b;  // [H x 2]

  const BlockParams& block_for_layer(std::size_t layer) const;

  // Unique parameter tensors in a fixed order with stable names.
  std::vector<std::pair<std::string, Tensor>> named_parameters(
      ParameterScope scope = ParameterScope::all) const;
  std::vector<Tensor> parameters(ParameterScope scope = ParameterScope::all) const;
  std::size_t parameter_count(ParameterScope scope = ParameterScope::all) const;

  // Deep copy of every parameter.
  SentimentModel clone() const;
  void set_trainable(bool trainable);
};

// Truncated-normal (std 0.02) weights, zero biases, unit norm gains.
SentimentModel init_model(const EncoderConfig& config, const VariantSpec& variant,
                          std::uint64_t seed);

// A packed batch of tokenized examples, padded to a common length.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> segment_ids;
  std::vector<std::size_t> attention_mask;
};

// Packs examples. With `trim_padding`, trailing columns that are PAD in every
// example are dropped; masked keys contribute exactly zero attention weight,
// so the result is unchanged.
Batch make_batch(std::span<const TokenizedExample> examples, bool trim_padding = true);
Batch make_batch(std::span<const TokenizedExample* const> examples, bool trim_padding = true);

struct ForwardOptions {
  bool training = false;
  // Required when training with a nonzero dropout rate.
  Rng* rng = nullptr;
  // When set, receives every attention probability matrix as
  // [layer][sequence * heads + head] -> [seq x seq].
  std::vector<std::vector<Tensor>>* attention_trace = nullptr;
};

inline constexpr double kMaskedLogit = -1e9;

// Hidden states for the whole batch: [batch * seq x H].
Tensor encode_batch(const SentimentModel& model, const Batch& batch, const ForwardOptions& options);
// Hidden states of one example: [seq x H].
Tensor encode(const SentimentModel& model, const TokenizedExample& example, bool training = false,
              Rng* rng = nullptr);

// Pooled CLS representation: tanh(dense(hidden[CLS])) -> [batch x H].
Tensor pool(const SentimentModel& model, const Tensor& hidden, const Batch& batch);

// Raw class scores [batch x 3].
Tensor classify_batch(const SentimentModel& model, const Batch& batch,
                      const ForwardOptions& options);
// Raw class scores [3] for one example, inference mode.
Tensor classify(const SentimentModel& model, const TokenizedExample& example);

// MLM scores for `positions` (flat indices into the batch's rows):
// [|positions| x V]. The output projection is tied to the token embedding.
Tensor mlm_logits(const SentimentModel& model, const Tensor& hidden,
                  std::span<const std::size_t> positions);
Tensor mlm_logits(const SentimentModel& model, const TokenizedExample& example,
                  std::span<const std::size_t> positions);

// Binary pair-objective scores [batch x 2] from the pooled representation.
Tensor pair_logits(const SentimentModel& model, const Tensor& pooled);
// Scores [2] for one pair-encoded example.
Tensor pair_logits(const SentimentModel& model, const TokenizedExample& example);

}  // namespace msnt
