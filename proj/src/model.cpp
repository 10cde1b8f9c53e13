#include "msnt/model.hpp"

#include <algorithm>
#include <cmath>

#include "msnt/errors.hpp"
#include "msnt/ops.hpp"

namespace msnt {

void EncoderConfig::validate() const {
  if (num_layers == 0 || hidden_size == 0 || num_heads == 0 || ff_size == 0 || vocab_size == 0 ||
      max_seq_len == 0) {
    throw ConfigError("encoder config: all extents must be positive");
  }
  if (hidden_size % num_heads != 0) {
    throw ConfigError("encoder config: hidden_size " + std::to_string(hidden_size) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("encoder config: dropout_rate must lie in [0, 1)");
  }
  if (vocab_size <= kNumSpecialTokens) {
    throw ConfigError("encoder config: vocab_size must exceed the special tokens");
  }
}

VariantSpec VariantSpec::of(VariantName name) {
  switch (name) {
    case VariantName::bertlike:
      return {name, PairObjective::nsp, MaskingMode::static_masking, false};
    case VariantName::albertlike:
      return {name, PairObjective::sop, MaskingMode::static_masking, true};
    case VariantName::robertalike:
      return {name, PairObjective::none, MaskingMode::dynamic_masking, false};
  }
  throw ConfigError("unknown variant");
}

void VariantSpec::validate() const {
  if (!(*this == of(name))) {
    throw ConfigError("variant " + std::string(to_string(name)) +
                      " has an inconsistent objective/masking/sharing recipe");
  }
}

std::string_view to_string(VariantName name) {
  switch (name) {
    case VariantName::bertlike: return "bertlike";
    case VariantName::albertlike: return "albertlike";
    case VariantName::robertalike: return "robertalike";
  }
  return "invalid";
}

std::optional<VariantName> parse_variant(std::string_view text) {
  for (VariantName n : {VariantName::bertlike, VariantName::albertlike, VariantName::robertalike}) {
    if (text == to_string(n)) return n;
  }
  return std::nullopt;
}

std::string_view to_string(PairObjective objective) {
  switch (objective) {
    case PairObjective::nsp: return "nsp";
    case PairObjective::sop: return "sop";
    case PairObjective::none: return "none";
  }
  return "invalid";
}

const BlockParams& SentimentModel::block_for_layer(std::size_t layer) const {
  return config.share_parameters ? blocks.at(0) : blocks.at(layer);
}

std::vector<std::pair<std::string, Tensor>> SentimentModel::named_parameters(
    ParameterScope scope) const {
  std::vector<std::pair<std::string, Tensor>> out;
  const bool with_embeddings = scope != ParameterScope::encoder_blocks;
  if (with_embeddings) {
    out.emplace_back("embeddings.token", token_embedding);
    out.emplace_back("embeddings.position", position_embedding);
    out.emplace_back("embeddings.segment", segment_embedding);
    out.emplace_back("embeddings.norm.gamma", embedding_norm_g);
    out.emplace_back("embeddings.norm.beta", embedding_norm_b);
    if (embedding_projection.defined()) {
      out.emplace_back("embeddings.projection", embedding_projection);
    }
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string prefix =
        config.share_parameters ? std::string("encoder.shared.") : "encoder.layer" + std::to_string(i) + ".";
    const BlockParams& b = blocks[i];
    out.emplace_back(prefix + "attention.query.weight", b.query_w);
    out.emplace_back(prefix + "attention.query.bias", b.query_b);
    out.emplace_back(prefix + "attention.key.weight", b.key_w);
    out.emplace_back(prefix + "attention.key.bias", b.key_b);
    out.emplace_back(prefix + "attention.value.weight", b.value_w);
    out.emplace_back(prefix + "attention.value.bias", b.value_b);
    out.emplace_back(prefix + "attention.output.weight", b.output_w);
    out.emplace_back(prefix + "attention.output.bias", b.output_b);
    out.emplace_back(prefix + "attention.norm.gamma", b.attn_norm_g);
    out.emplace_back(prefix + "attention.norm.beta", b.attn_norm_b);
    out.emplace_back(prefix + "ff.in.weight", b.ff_in_w);
    out.emplace_back(prefix + "ff.in.bias", b.ff_in_b);
    out.emplace_back(prefix + "ff.out.weight", b.ff_out_w);
    out.emplace_back(prefix + "ff.out.bias", b.ff_out_b);
    out.emplace_back(prefix + "ff.norm.gamma", b.ff_norm_g);
    out.emplace_back(prefix + "ff.norm.beta", b.ff_norm_b);
  }
  if (scope == ParameterScope::encoder_blocks) return out;
  out.emplace_back("pooler.weight", pooler_w);
  out.emplace_back("pooler.bias", pooler_b);
  out.emplace_back("classifier.weight", classifier_w);
  out.emplace_back("classifier.bias", classifier_b);
  if (scope == ParameterScope::classifier) return out;
  out.emplace_back("mlm.dense.weight", mlm_dense_w);
  out.emplace_back("mlm.dense.bias", mlm_dense_b);
  out.emplace_back("mlm.norm.gamma", mlm_norm_g);
  out.emplace_back("mlm.norm.beta", mlm_norm_b);
  out.emplace_back("mlm.output_bias", mlm_output_b);
  out.emplace_back("pair.weight", pair_w);
  out.emplace_back("pair.bias", pair_b);
  return out;
}

std::vector<Tensor> SentimentModel::parameters(ParameterScope scope) const {
  std::vector<Tensor> out;
  for (auto& [_, t] : named_parameters(scope)) out.push_back(t);
  return out;
}

std::size_t SentimentModel::parameter_count(ParameterScope scope) const {
  std::size_t n = 0;
  for (const auto& [_, t] : named_parameters(scope)) n += t.size();
  return n;
}

namespace {

Tensor deep(const Tensor& t) { return t.defined() ? t.clone() : Tensor(); }

}  // namespace

SentimentModel SentimentModel::clone() const {
  SentimentModel m;
  m.config = config;
  m.variant = variant;
  m.label_order = label_order;
  m.vocab_hash = vocab_hash;
  m.token_embedding = deep(token_embedding);
  m.position_embedding = deep(position_embedding);
  m.segment_embedding = deep(segment_embedding);
  m.embedding_norm_g = deep(embedding_norm_g);
  m.embedding_norm_b = deep(embedding_norm_b);
  m.embedding_projection = deep(embedding_projection);
  for (const BlockParams& b : blocks) {
    m.blocks.push_back(BlockParams{deep(b.query_w), deep(b.query_b), deep(b.key_w), deep(b.key_b),
                                   deep(b.value_w), deep(b.value_b), deep(b.output_w),
                                   deep(b.output_b), deep(b.attn_norm_g), deep(b.attn_norm_b),
                                   deep(b.ff_in_w), deep(b.ff_in_b), deep(b.ff_out_w),
                                   deep(b.ff_out_b), deep(b.ff_norm_g), deep(b.ff_norm_b)});
  }
  m.pooler_w = deep(pooler_w);
  m.pooler_b = deep(pooler_b);
  m.classifier_w = deep(classifier_w);
  m.classifier_b = deep(classifier_b);
  m.mlm_dense_w = deep(mlm_dense_w);
  m.mlm_dense_b = deep(mlm_dense_b);
  m.mlm_norm_g = deep(mlm_norm_g);
  m.mlm_norm_b = deep(mlm_norm_b);
  m.mlm_output_b = deep(mlm_output_b);
  m.pair_w = deep(pair_w);
  m.pair_b = deep(pair_b);
  return m;
}

void SentimentModel::set_trainable(bool trainable) {
  for (Tensor& t : parameters()) t.set_requires_grad(trainable);
}

SentimentModel init_model(const EncoderConfig& config, const VariantSpec& variant,
                          std::uint64_t seed) {
  config.validate();
  variant.validate();
  if (config.share_parameters != variant.share_parameters) {
    throw ConfigError("encoder config sharing flag disagrees with variant " +
                      std::string(to_string(variant.name)));
  }
  Rng rng(seed);
  auto weight = [&rng](std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols);
    for (double& e : v) e = rng.truncated_normal(0.02);
    return Tensor({rows, cols}, std::move(v), true);
  };
  auto zeros = [](std::size_t n) { return Tensor::zeros({n}, true); };
  auto ones = [](std::size_t n) { return Tensor::full({n}, 1.0, true); };

  const std::size_t h = config.hidden_size, e = config.embedding_width();
  SentimentModel m;
  m.config = config;
  m.variant = variant;
  m.token_embedding = weight(config.vocab_size, e);
  m.position_embedding = weight(config.max_seq_len, e);
  m.segment_embedding = weight(2, e);
  m.embedding_norm_g = ones(e);
  m.embedding_norm_b = zeros(e);
  if (e != h) m.embedding_projection = weight(e, h);
  const std::size_t unique_blocks = config.share_parameters ? 1 : config.num_layers;
  for (std::size_t i = 0; i < unique_blocks; ++i) {
    BlockParams b;
    b.query_w = weight(h, h);
    b.query_b = zeros(h);
    b.key_w = weight(h, h);
    b.key_b = zeros(h);
    b.value_w = weight(h, h);
    b.value_b = zeros(h);
    b.output_w = weight(h, h);
    b.output_b = zeros(h);
    b.attn_norm_g = ones(h);
    b.attn_norm_b = zeros(h);
    b.ff_in_w = weight(h, config.ff_size);
    b.ff_in_b = zeros(config.ff_size);
    b.ff_out_w = weight(config.ff_size, h);
    b.ff_out_b = zeros(h);
    b.ff_norm_g = ones(h);
    b.ff_norm_b = zeros(h);
    m.blocks.push_back(std::move(b));
  }
  m.pooler_w = weight(h, h);
  m.pooler_b = zeros(h);
  m.classifier_w = weight(h, kNumClasses);
  m.classifier_b = zeros(kNumClasses);
  m.mlm_dense_w = weight(h, e);
  m.mlm_dense_b = zeros(e);
  m.mlm_norm_g = ones(e);
  m.mlm_norm_b = zeros(e);
  m.mlm_output_b = zeros(config.vocab_size);
  m.pair_w = weight(h, 2);
  m.pair_b = zeros(2);
  return m;
}

Batch make_batch(std::span<const TokenizedExample* const> examples, bool trim_padding) {
  if (examples.empty()) throw ContractError("make_batch: no examples");
  std::size_t seq = 0;
  for (const TokenizedExample* ex : examples) {
    std::size_t extent = ex->length();
    if (trim_padding) {
      while (extent > 0 && ex->attention_mask[extent - 1] == 0) --extent;
    }
    seq = std::max(seq, extent);
  }
  if (seq == 0) throw ContractError("make_batch: examples are empty");
  Batch b;
  b.batch_size = examples.size();
  b.seq_len = seq;
  b.token_ids.assign(b.batch_size * seq, kPadId);
  b.segment_ids.assign(b.batch_size * seq, 0);
  b.attention_mask.assign(b.batch_size * seq, 0);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TokenizedExample& ex = *examples[i];
    const std::size_t n = std::min(seq, ex.length());
    for (std::size_t t = 0; t < seq; ++t) {
      const std::size_t src = std::min(t, n - 1);
      b.token_ids[i * seq + t] = t < n ? ex.token_ids[t] : kPadId;
      b.segment_ids[i * seq + t] = ex.segment_ids[src];
      b.attention_mask[i * seq + t] = t < n ? ex.attention_mask[t] : 0;
    }
  }
  return b;
}

Batch make_batch(std::span<const TokenizedExample> examples, bool trim_padding) {
  std::vector<const TokenizedExample*> ptrs;
  ptrs.reserve(examples.size());
  for (const TokenizedExample& ex : examples) ptrs.push_back(&ex);
  return make_batch(std::span<const TokenizedExample* const>(ptrs), trim_padding);
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_row_vector(matmul(x, w), b);
}

Tensor maybe_dropout(const Tensor& x, const SentimentModel& model, const ForwardOptions& options) {
  if (!options.training || model.config.dropout_rate == 0.0) return x;
  if (options.rng == nullptr) throw ContractError("training forward pass needs an rng for dropout");
  return dropout(x, model.config.dropout_rate, true, *options.rng);
}

Tensor attention(const SentimentModel& model, const BlockParams& p, const Tensor& x,
                 const Batch& batch, std::span<const Tensor> key_masks,
                 const ForwardOptions& options, std::vector<Tensor>* trace) {
  const std::size_t heads = model.config.num_heads;
  const std::size_t head_dim = model.config.hidden_size / heads;
  const std::size_t seq = batch.seq_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor q = linear(x, p.query_w, p.query_b);
  const Tensor k = linear(x, p.key_w, p.key_b);
  const Tensor v = linear(x, p.value_w, p.value_b);

  std::vector<Tensor> per_sequence;
  per_sequence.reserve(batch.batch_size);
  std::vector<Tensor> per_head(heads);
  for (std::size_t s = 0; s < batch.batch_size; ++s) {
    const Tensor qs = batch.batch_size == 1 ? q : slice_rows(q, s * seq, seq);
    const Tensor ks = batch.batch_size == 1 ? k : slice_rows(k, s * seq, seq);
    const Tensor vs = batch.batch_size == 1 ? v : slice_rows(v, s * seq, seq);
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor qh = heads == 1 ? qs : slice_cols(qs, h * head_dim, head_dim);
      const Tensor kh = heads == 1 ? ks : slice_cols(ks, h * head_dim, head_dim);
      const Tensor vh = heads == 1 ? vs : slice_cols(vs, h * head_dim, head_dim);
      Tensor scores = add(scale(matmul_transposed(qh, kh), inv_sqrt), key_masks[s]);
      Tensor probs = softmax(scores, 1);
      if (trace != nullptr) trace->push_back(probs);
      per_head[h] = matmul(probs, vh);
    }
    per_sequence.push_back(heads == 1 ? per_head[0] : concat_cols(per_head));
  }
  const Tensor context = batch.batch_size == 1 ? per_sequence[0] : concat_rows(per_sequence);
  return maybe_dropout(linear(context, p.output_w, p.output_b), model, options);
}

void check_example_fits(const SentimentModel& model, std::size_t length) {
  if (length > model.config.max_seq_len) {
    throw ContractError("input of length " + std::to_string(length) + " exceeds max_seq_len " +
                        std::to_string(model.config.max_seq_len));
  }
}

}  // namespace

Tensor encode_batch(const SentimentModel& model, const Batch& batch, const ForwardOptions& options) {
  check_example_fits(model, batch.seq_len);
  const std::size_t seq = batch.seq_len;
  const std::size_t rows = batch.batch_size * seq;
  std::vector<std::size_t> positions(rows);
  for (std::size_t i = 0; i < rows; ++i) positions[i] = i % seq;

  Tensor x = add(add(embedding_lookup(model.token_embedding, batch.token_ids),
                     embedding_lookup(model.position_embedding, positions)),
                 embedding_lookup(model.segment_embedding, batch.segment_ids));
  x = layernorm(x, model.embedding_norm_g, model.embedding_norm_b);
  x = maybe_dropout(x, model, options);
  if (model.embedding_projection.defined()) x = matmul(x, model.embedding_projection);

  // Additive key masks: PAD keys get a large negative logit in every row.
  std::vector<Tensor> key_masks;
  key_masks.reserve(batch.batch_size);
  for (std::size_t s = 0; s < batch.batch_size; ++s) {
    std::vector<double> m(seq * seq, 0.0);
    for (std::size_t j = 0; j < seq; ++j) {
      if (batch.attention_mask[s * seq + j] == 0) {
        for (std::size_t i = 0; i < seq; ++i) m[i * seq + j] = kMaskedLogit;
      }
    }
    key_masks.emplace_back(Shape{seq, seq}, std::move(m));
  }

  if (options.attention_trace != nullptr) options.attention_trace->clear();
  for (std::size_t layer = 0; layer < model.config.num_layers; ++layer) {
    const BlockParams& p = model.block_for_layer(layer);
    std::vector<Tensor>* trace = nullptr;
    if (options.attention_trace != nullptr) {
      options.attention_trace->emplace_back();
      trace = &options.attention_trace->back();
    }
    const Tensor attn = attention(model, p, x, batch, key_masks, options, trace);
    const Tensor h1 = layernorm(add(x, attn), p.attn_norm_g, p.attn_norm_b);
    const Tensor ff = maybe_dropout(
        linear(gelu(linear(h1, p.ff_in_w, p.ff_in_b)), p.ff_out_w, p.ff_out_b), model, options);
    x = layernorm(add(h1, ff), p.ff_norm_g, p.ff_norm_b);
  }
  return x;
}

Tensor encode(const SentimentModel& model, const TokenizedExample& example, bool training,
              Rng* rng) {
  check_example_fits(model, example.length());
  const TokenizedExample* ptr = &example;
  const Batch batch = make_batch(std::span<const TokenizedExample* const>(&ptr, 1), false);
  ForwardOptions options;
  options.training = training;
  options.rng = rng;
  return encode_batch(model, batch, options);
}

Tensor pool(const SentimentModel& model, const Tensor& hidden, const Batch& batch) {
  std::vector<std::size_t> cls_rows(batch.batch_size);
  for (std::size_t s = 0; s < batch.batch_size; ++s) cls_rows[s] = s * batch.seq_len;
  const Tensor cls = batch.batch_size == 1 && batch.seq_len == 1 ? hidden : gather_rows(hidden, cls_rows);
  return tanh(linear(cls, model.pooler_w, model.pooler_b));
}

Tensor classify_batch(const SentimentModel& model, const Batch& batch,
                      const ForwardOptions& options) {
  const Tensor hidden = encode_batch(model, batch, options);
  const Tensor pooled = maybe_dropout(pool(model, hidden, batch), model, options);
  return linear(pooled, model.classifier_w, model.classifier_b);
}

Tensor classify(const SentimentModel& model, const TokenizedExample& example) {
  check_example_fits(model, example.length());
  const TokenizedExample* ptr = &example;
  const Batch batch = make_batch(std::span<const TokenizedExample* const>(&ptr, 1), true);
  return reshape(classify_batch(model, batch, ForwardOptions{}), {kNumClasses});
}

Tensor mlm_logits(const SentimentModel& model, const Tensor& hidden,
                  std::span<const std::size_t> positions) {
  const Tensor selected = gather_rows(hidden, positions);
  const Tensor transformed =
      layernorm(gelu(linear(selected, model.mlm_dense_w, model.mlm_dense_b)), model.mlm_norm_g,
                model.mlm_norm_b);
  return add_row_vector(matmul_transposed(transformed, model.token_embedding), model.mlm_output_b);
}

Tensor mlm_logits(const SentimentModel& model, const TokenizedExample& example,
                  std::span<const std::size_t> positions) {
  for (std::size_t p : positions) {
    if (p >= example.length()) {
      throw IndexError("mlm_logits: position " + std::to_string(p) + " out of range for length " +
                       std::to_string(example.length()));
    }
  }
  return mlm_logits(model, encode(model, example), positions);
}

Tensor pair_logits(const SentimentModel& model, const Tensor& pooled) {
  return linear(pooled, model.pair_w, model.pair_b);
}

Tensor pair_logits(const SentimentModel& model, const TokenizedExample& example) {
  const bool is_pair = std::count(example.token_ids.begin(), example.token_ids.end(), kSepId) == 2;
  if (!is_pair) throw ContractError("pair_logits needs a pair-encoded example");
  check_example_fits(model, example.length());
  const TokenizedExample* ptr = &example;
  const Batch batch = make_batch(std::span<const TokenizedExample* const>(&ptr, 1), true);
  const Tensor hidden = encode_batch(model, batch, ForwardOptions{});
  return reshape(pair_logits(model, pool(model, hidden, batch)), {2});
}

}  // namespace msnt
