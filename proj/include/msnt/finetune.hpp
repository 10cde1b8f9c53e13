#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "msnt/dataset.hpp"
#include "msnt/labels.hpp"
#include "msnt/metrics.hpp"
#include "msnt/model.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt {

struct EarlyStoppingConfig {
  std::size_t patience = 3;
  double min_delta = 1e-4;
};

// Tracks a higher-is-better validation metric. An evaluation improves when it
// beats the best so far by more than min_delta; the first always does.
class EarlyStopping {
 public:
  explicit EarlyStopping(EarlyStoppingConfig config);

  // Records the next evaluation and returns whether it improved.
  bool update(double metric);
  bool should_stop() const { return stale_ >= config_.patience; }
  // 1-based index of the best evaluation; 0 before any update.
  std::size_t best_evaluation() const { return best_index_; }
  double best_metric() const { return best_; }
  std::size_t evaluations() const { return count_; }

 private:
  EarlyStoppingConfig config_;
  double best_ = 0.0;
  std::size_t best_index_ = 0;
  std::size_t count_ = 0;
  std::size_t stale_ = 0;
};

struct StopSummary {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
};

// Runs `run_epoch(epoch)` for epochs 1..max_epochs; each call returns the
// validation metric. `on_improve(epoch)` fires when that epoch is the new best
// so the caller can snapshot its model.
StopSummary run_with_early_stopping(std::size_t max_epochs, const EarlyStoppingConfig& config,
                                    const std::function<double(std::size_t)>& run_epoch,
                                    const std::function<void(std::size_t)>& on_improve);

struct FinetuneConfig {
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double learning_rate = 5e-4;
  double clip_norm = 1.0;
  std::size_t max_len = 64;
  EarlyStoppingConfig early_stopping;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_macro_f1 = 0.0;
};

struct FinetuneResult {
  SentimentModel model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

std::vector<TokenizedExample> encode_examples(const Vocab& vocab,
                                              std::span<const LabeledExample> data,
                                              std::size_t max_len);
// Throws DataError naming the first record whose label is outside the class set.
void check_labels(std::span<const LabeledExample> data, const char* split_name);
void check_vocab(const SentimentModel& model, const Vocab& vocab);

// Cross-entropy training on a clone of `pretrained`; returns the epoch with the
// best validation macro-F1.
FinetuneResult finetune(const SentimentModel& pretrained, const Vocab& vocab,
                        std::span<const LabeledExample> train,
                        std::span<const LabeledExample> valid, const FinetuneConfig& config);

// Inference-mode class scores [n x 3], computed in batches.
std::vector<std::array<double, kNumClasses>> predict_logits(
    const SentimentModel& model, std::span<const TokenizedExample> examples);
// Softmax of the class scores; one triple per example.
std::vector<ProbTriple> predict_proba(const SentimentModel& model,
                                      std::span<const TokenizedExample> examples);
std::vector<ProbTriple> predict_proba(const SentimentModel& model, const Vocab& vocab,
                                      std::span<const LabeledExample> examples,
                                      std::size_t max_len);
std::vector<Sentiment> predict_labels(std::span<const ProbTriple> probs);
std::vector<Sentiment> labels_of(std::span<const LabeledExample> data);

EvalReport evaluate_model(const SentimentModel& model, const Vocab& vocab,
                          std::span<const LabeledExample> data, std::size_t max_len,
                          std::string name = {});

// One JSON object per line: {"epoch", "train_loss", "valid_macro_f1"}.
void write_history_jsonl(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace msnt
