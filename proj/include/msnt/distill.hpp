#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "msnt/dataset.hpp"
#include "msnt/finetune.hpp"
#include "msnt/model.hpp"

namespace msnt {

struct DistillConfig {
  double temperature = 2.0;
  // Weight of the soft-target term; 1 - alpha goes to the hard-label loss.
  double alpha = 0.5;
  // Defaults to default_student_config(teacher).
  std::optional<EncoderConfig> student;
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double learning_rate = 5e-4;
  double clip_norm = 1.0;
  std::size_t max_len = 64;
  EarlyStoppingConfig early_stopping;
  // Start the student from the teacher's embeddings, every other block and
  // the heads. Random initialization otherwise.
  bool init_from_teacher = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CompressionReport {
  std::size_t teacher_parameters = 0;
  std::size_t student_parameters = 0;
  // 1 - student / teacher.
  double size_reduction = 0.0;
  double teacher_macro_f1 = 0.0;
  double student_macro_f1 = 0.0;
  // student_macro_f1 / teacher_macro_f1.
  double retention = 0.0;
};

nlohmann::ordered_json to_json(const CompressionReport& report);

// softmax(logits / T). Throws ConfigError unless T > 0.
ProbTriple soft_targets(const ProbTriple& logits, double temperature);

// alpha * T^2 * KL(softmax(teacher/T) || softmax(student/T))
//   + (1 - alpha) * cross_entropy(student, targets), averaged over rows.
// Teacher logits are constants; gradients flow into `student_logits` only.
Tensor distillation_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                         std::span<const std::size_t> targets, double temperature, double alpha);

// Half the teacher's layers (at least one), everything else unchanged.
EncoderConfig default_student_config(const EncoderConfig& teacher);

// Student with the teacher's embeddings, pooler and heads, and student layer
// i taken from teacher layer i * L_teacher / L_student.
SentimentModel init_student(const SentimentModel& teacher, const EncoderConfig& student_config,
                            std::uint64_t seed);

struct DistillResult {
  SentimentModel student;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  CompressionReport report;
};

// Parameter counts cover what classification needs (ParameterScope::classifier).
// Throws ConfigError when the student is not smaller than the teacher.
DistillResult distill(const SentimentModel& teacher, const Vocab& vocab,
                      std::span<const LabeledExample> train, std::span<const LabeledExample> valid,
                      std::span<const LabeledExample> test, const DistillConfig& config);

}  // namespace msnt
