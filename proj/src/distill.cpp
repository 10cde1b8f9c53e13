#include "msnt/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msnt/errors.hpp"
#include "msnt/ops.hpp"
#include "msnt/optim.hpp"

namespace msnt {

void DistillConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("distill: temperature must be positive");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill: alpha must lie in [0, 1]");
  if (epochs == 0) throw ConfigError("distill: epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("distill: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("distill: learning_rate must be positive");
  if (early_stopping.patience == 0) throw ConfigError("distill: patience must be at least 1");
}

nlohmann::ordered_json to_json(const CompressionReport& r) {
  nlohmann::ordered_json j;
  j["teacher_parameters"] = r.teacher_parameters;
  j["student_parameters"] = r.student_parameters;
  j["size_reduction"] = r.size_reduction;
  j["teacher_macro_f1"] = r.teacher_macro_f1;
  j["student_macro_f1"] = r.student_macro_f1;
  j["retention"] = r.retention;
  return j;
}

ProbTriple soft_targets(const ProbTriple& logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("soft_targets: temperature must be positive");
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  ProbTriple p{};
  double total = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp((logits[c] - m) / temperature);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

Tensor distillation_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                         std::span<const std::size_t> targets, double temperature, double alpha) {
  if (!(temperature > 0.0)) throw ConfigError("distillation_loss: temperature must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distillation_loss: alpha outside [0, 1]");
  if (student_logits.shape() != teacher_logits.shape() || student_logits.ndim() != 2) {
    throw DimensionError("distillation_loss: student " + shape_to_string(student_logits.shape()) +
                         " vs teacher " + shape_to_string(teacher_logits.shape()));
  }
  const std::size_t rows = student_logits.rows(), classes = student_logits.cols();

  Tensor loss;
  if (alpha > 0.0) {
    // KL(p_t || p_s) = sum p_t log p_t - sum p_t log p_s.
    std::vector<double> pt(rows * classes);
    double entropy_term = 0.0;
    const auto z = teacher_logits.data();
    for (std::size_t r = 0; r < rows; ++r) {
      double m = z[r * classes];
      for (std::size_t c = 1; c < classes; ++c) m = std::max(m, z[r * classes + c]);
      double total = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        pt[r * classes + c] = std::exp((z[r * classes + c] - m) / temperature);
        total += pt[r * classes + c];
      }
      for (std::size_t c = 0; c < classes; ++c) {
        double& p = pt[r * classes + c];
        p /= total;
        if (p > 0.0) entropy_term += p * std::log(p);
      }
    }
    const double n = static_cast<double>(rows);
    const Tensor log_ps = log_softmax(scale(student_logits, 1.0 / temperature), 1);
    const Tensor cross = sum(mul(Tensor(student_logits.shape(), std::move(pt)), log_ps));
    const Tensor kl = scale(sub(Tensor::scalar(entropy_term), cross), 1.0 / n);
    loss = scale(kl, alpha * temperature * temperature);
  }
  if (alpha < 1.0) {
    const Tensor hard = scale(cross_entropy(student_logits, targets), 1.0 - alpha);
    loss = loss.defined() ? add(loss, hard) : hard;
  }
  return loss;
}

EncoderConfig default_student_config(const EncoderConfig& teacher) {
  EncoderConfig student = teacher;
  student.num_layers = std::max<std::size_t>(1, teacher.num_layers / 2);
  return student;
}

SentimentModel init_student(const SentimentModel& teacher, const EncoderConfig& student_config,
                            std::uint64_t seed) {
  student_config.validate();
  VariantSpec variant = teacher.variant;
  SentimentModel student = init_model(student_config, variant, seed);
  student.vocab_hash = teacher.vocab_hash;
  const EncoderConfig& t = teacher.config;
  const bool compatible = t.hidden_size == student_config.hidden_size &&
                          t.num_heads == student_config.num_heads &&
                          t.ff_size == student_config.ff_size &&
                          t.vocab_size == student_config.vocab_size &&
                          t.max_seq_len == student_config.max_seq_len &&
                          t.embedding_width() == student_config.embedding_width();
  if (!compatible) {
    throw ConfigError("init_student: student widths must match the teacher's");
  }
  auto copy = [](Tensor& dst, const Tensor& src) {
    if (src.defined()) dst = src.clone();
  };
  copy(student.token_embedding, teacher.token_embedding);
  copy(student.position_embedding, teacher.position_embedding);
  copy(student.segment_embedding, teacher.segment_embedding);
  copy(student.embedding_norm_g, teacher.embedding_norm_g);
  copy(student.embedding_norm_b, teacher.embedding_norm_b);
  copy(student.embedding_projection, teacher.embedding_projection);
  for (std::size_t i = 0; i < student.blocks.size(); ++i) {
    const std::size_t src_layer = i * t.num_layers / student_config.num_layers;
    const BlockParams& src = teacher.block_for_layer(src_layer);
    BlockParams& dst = student.blocks[i];
    copy(dst.query_w, src.query_w);
    copy(dst.query_b, src.query_b);
    copy(dst.key_w, src.key_w);
    copy(dst.key_b, src.key_b);
    copy(dst.value_w, src.value_w);
    copy(dst.value_b, src.value_b);
    copy(dst.output_w, src.output_w);
    copy(dst.output_b, src.output_b);
    copy(dst.attn_norm_g, src.attn_norm_g);
    copy(dst.attn_norm_b, src.attn_norm_b);
    copy(dst.ff_in_w, src.ff_in_w);
    copy(dst.ff_in_b, src.ff_in_b);
    copy(dst.ff_out_w, src.ff_out_w);
    copy(dst.ff_out_b, src.ff_out_b);
    copy(dst.ff_norm_g, src.ff_norm_g);
    copy(dst.ff_norm_b, src.ff_norm_b);
  }
  copy(student.pooler_w, teacher.pooler_w);
  copy(student.pooler_b, teacher.pooler_b);
  copy(student.classifier_w, teacher.classifier_w);
  copy(student.classifier_b, teacher.classifier_b);
  copy(student.mlm_dense_w, teacher.mlm_dense_w);
  copy(student.mlm_dense_b, teacher.mlm_dense_b);
  copy(student.mlm_norm_g, teacher.mlm_norm_g);
  copy(student.mlm_norm_b, teacher.mlm_norm_b);
  copy(student.mlm_output_b, teacher.mlm_output_b);
  copy(student.pair_w, teacher.pair_w);
  copy(student.pair_b, teacher.pair_b);
  return student;
}

DistillResult distill(const SentimentModel& teacher, const Vocab& vocab,
                      std::span<const LabeledExample> train, std::span<const LabeledExample> valid,
                      std::span<const LabeledExample> test, const DistillConfig& config) {
  config.validate();
  if (train.empty() || valid.empty() || test.empty()) {
    throw DataError("distill: train, validation and test splits must be non-empty");
  }
  check_labels(train, "train");
  check_labels(valid, "validation");
  check_labels(test, "test");
  check_vocab(teacher, vocab);

  const EncoderConfig student_config = config.student.value_or(default_student_config(teacher.config));
  SentimentModel student =
      config.init_from_teacher
          ? init_student(teacher, student_config, config.seed)
          : init_model(student_config, teacher.variant, config.seed);
  student.vocab_hash = teacher.vocab_hash;

  CompressionReport report;
  report.teacher_parameters = teacher.parameter_count(ParameterScope::classifier);
  report.student_parameters = student.parameter_count(ParameterScope::classifier);
  if (report.student_parameters >= report.teacher_parameters) {
    throw ConfigError("distill: student has " + std::to_string(report.student_parameters) +
                      " parameters, not fewer than the teacher's " +
                      std::to_string(report.teacher_parameters));
  }
  report.size_reduction = 1.0 - static_cast<double>(report.student_parameters) /
                                    static_cast<double>(report.teacher_parameters);

  const std::size_t max_len =
      std::min({config.max_len, teacher.config.max_seq_len, student_config.max_seq_len});
  const std::vector<TokenizedExample> train_enc = encode_examples(vocab, train, max_len);
  const std::vector<TokenizedExample> valid_enc = encode_examples(vocab, valid, max_len);
  const std::vector<Sentiment> valid_truth = labels_of(valid);
  // The teacher is frozen, so its scores are computed once.
  const auto teacher_logits = predict_logits(teacher, train_enc);

  student.set_trainable(true);
  Adam adam(student.parameters(),
            AdamOptions{.learning_rate = config.learning_rate, .clip_norm = config.clip_norm});
  Rng dropout_rng(derive_seed(config.seed, 0x64736472));

  DistillResult result;
  std::vector<std::size_t> order(train.size());
  auto run_epoch = [&](std::size_t epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, epoch, 0x64737368));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const TokenizedExample*> rows;
      std::vector<std::size_t> targets;
      std::vector<double> soft;
      for (std::size_t i = begin; i < end; ++i) {
        rows.push_back(&train_enc[order[i]]);
        targets.push_back(index_of(train[order[i]].label));
        soft.insert(soft.end(), teacher_logits[order[i]].begin(), teacher_logits[order[i]].end());
      }
      const Batch batch = make_batch(rows, true);
      const Tensor teacher_batch({end - begin, kNumClasses}, std::move(soft));
      Tape tape;
      const Tensor logits =
          classify_batch(student, batch, ForwardOptions{.training = true, .rng = &dropout_rng});
      const Tensor loss =
          distillation_loss(logits, teacher_batch, targets, config.temperature, config.alpha);
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
      loss_sum += loss.item() * static_cast<double>(end - begin);
    }
    const EvalReport r = compute_metrics(valid_truth, predict_labels(predict_proba(student, valid_enc)));
    result.history.push_back({epoch, loss_sum / static_cast<double>(train.size()), r.macro.f1});
    return r.macro.f1;
  };
  auto on_improve = [&](std::size_t) { result.student = student.clone(); };
  const StopSummary summary =
      run_with_early_stopping(config.epochs, config.early_stopping, run_epoch, on_improve);
  result.best_epoch = summary.best_epoch;
  result.student.set_trainable(false);

  report.teacher_macro_f1 = evaluate_model(teacher, vocab, test, max_len).macro.f1;
  report.student_macro_f1 = evaluate_model(result.student, vocab, test, max_len).macro.f1;
  report.retention = report.teacher_macro_f1 > 0.0
                         ? report.student_macro_f1 / report.teacher_macro_f1
                         : 0.0;
  result.report = report;
  return result;
}

}  // namespace msnt
