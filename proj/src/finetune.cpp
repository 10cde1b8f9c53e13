#include "msnt/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "msnt/errors.hpp"
#include "msnt/ops.hpp"
#include "msnt/optim.hpp"

namespace msnt {

EarlyStopping::EarlyStopping(EarlyStoppingConfig config) : config_(config) {
  if (config_.patience == 0) throw ConfigError("early stopping: patience must be at least 1");
  if (!(config_.min_delta >= 0.0)) throw ConfigError("early stopping: min_delta must be >= 0");
}

bool EarlyStopping::update(double metric) {
  ++count_;
  if (best_index_ == 0 || metric > best_ + config_.min_delta) {
    best_ = metric;
    best_index_ = count_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

StopSummary run_with_early_stopping(std::size_t max_epochs, const EarlyStoppingConfig& config,
                                    const std::function<double(std::size_t)>& run_epoch,
                                    const std::function<void(std::size_t)>& on_improve) {
  EarlyStopping stopper(config);
  StopSummary summary;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    const double metric = run_epoch(epoch);
    summary.epochs_run = epoch;
    if (stopper.update(metric) && on_improve) on_improve(epoch);
    if (stopper.should_stop()) break;
  }
  summary.best_epoch = stopper.best_evaluation();
  summary.best_metric = stopper.best_metric();
  return summary;
}

void FinetuneConfig::validate() const {
  if (epochs == 0) throw ConfigError("finetune: epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("finetune: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("finetune: learning_rate must be positive");
  if (max_len < 3) throw ConfigError("finetune: max_len must be at least 3");
  if (early_stopping.patience == 0) throw ConfigError("finetune: patience must be at least 1");
}

std::vector<TokenizedExample> encode_examples(const Vocab& vocab,
                                              std::span<const LabeledExample> data,
                                              std::size_t max_len) {
  std::vector<TokenizedExample> out;
  out.reserve(data.size());
  for (const LabeledExample& ex : data) out.push_back(encode_single(vocab, ex.text, max_len));
  return out;
}

void check_labels(std::span<const LabeledExample> data, const char* split_name) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!is_valid(data[i].label)) {
      throw DataError(std::string(split_name) + " record " + std::to_string(i) + " (id " +
                      std::to_string(data[i].id) + ") has a label outside the class set");
    }
  }
}

void check_vocab(const SentimentModel& model, const Vocab& vocab) {
  if (model.config.vocab_size != vocab.size()) {
    throw ConfigError("model vocab_size " + std::to_string(model.config.vocab_size) +
                      " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  if (model.vocab_hash != 0 && model.vocab_hash != vocab.hash()) {
    throw ConfigError("model was built against a different vocabulary");
  }
}

namespace {

constexpr std::size_t kInferenceBatch = 64;

std::vector<std::size_t> label_indices(std::span<const LabeledExample> data,
                                       std::span<const std::size_t> order, std::size_t begin,
                                       std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(index_of(data[order[i]].label));
  return out;
}

}  // namespace

FinetuneResult finetune(const SentimentModel& pretrained, const Vocab& vocab,
                        std::span<const LabeledExample> train,
                        std::span<const LabeledExample> valid, const FinetuneConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("finetune: empty training split");
  if (valid.empty()) throw DataError("finetune: empty validation split");
  check_labels(train, "train");
  check_labels(valid, "validation");
  check_vocab(pretrained, vocab);

  const std::size_t max_len = std::min(config.max_len, pretrained.config.max_seq_len);
  const std::vector<TokenizedExample> train_enc = encode_examples(vocab, train, max_len);
  const std::vector<TokenizedExample> valid_enc = encode_examples(vocab, valid, max_len);
  const std::vector<Sentiment> valid_truth = labels_of(valid);

  SentimentModel model = pretrained.clone();
  model.set_trainable(true);
  Adam adam(model.parameters(),
            AdamOptions{.learning_rate = config.learning_rate, .clip_norm = config.clip_norm});
  Rng dropout_rng(derive_seed(config.seed, 0x66746472));

  FinetuneResult result;
  std::vector<std::size_t> order(train.size());

  auto run_epoch = [&](std::size_t epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, epoch, 0x66747368));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const TokenizedExample*> rows;
      for (std::size_t i = begin; i < end; ++i) rows.push_back(&train_enc[order[i]]);
      const Batch batch = make_batch(rows, true);
      const std::vector<std::size_t> targets = label_indices(train, order, begin, end);
      Tape tape;
      const Tensor logits =
          classify_batch(model, batch, ForwardOptions{.training = true, .rng = &dropout_rng});
      const Tensor loss = cross_entropy(logits, targets);
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
      loss_sum += loss.item() * static_cast<double>(end - begin);
    }
    const std::vector<ProbTriple> probs = predict_proba(model, valid_enc);
    const EvalReport report = compute_metrics(valid_truth, predict_labels(probs));
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(train.size()), report.macro.f1});
    return report.macro.f1;
  };
  auto on_improve = [&](std::size_t) { result.model = model.clone(); };

  const StopSummary summary =
      run_with_early_stopping(config.epochs, config.early_stopping, run_epoch, on_improve);
  result.best_epoch = summary.best_epoch;
  result.model.set_trainable(false);
  return result;
}

std::vector<std::array<double, kNumClasses>> predict_logits(
    const SentimentModel& model, std::span<const TokenizedExample> examples) {
  std::vector<std::array<double, kNumClasses>> out;
  out.reserve(examples.size());
  for (std::size_t begin = 0; begin < examples.size(); begin += kInferenceBatch) {
    const std::size_t count = std::min(kInferenceBatch, examples.size() - begin);
    const Batch batch = make_batch(examples.subspan(begin, count), true);
    const Tensor logits = classify_batch(model, batch, ForwardOptions{});
    for (std::size_t r = 0; r < count; ++r) {
      out.push_back({logits.at(r, 0), logits.at(r, 1), logits.at(r, 2)});
    }
  }
  return out;
}

std::vector<ProbTriple> predict_proba(const SentimentModel& model,
                                      std::span<const TokenizedExample> examples) {
  std::vector<ProbTriple> out;
  out.reserve(examples.size());
  for (const auto& z : predict_logits(model, examples)) {
    const double m = std::max({z[0], z[1], z[2]});
    ProbTriple p{};
    double total = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      p[c] = std::exp(z[c] - m);
      total += p[c];
    }
    for (double& v : p) v /= total;
    out.push_back(p);
  }
  return out;
}

std::vector<ProbTriple> predict_proba(const SentimentModel& model, const Vocab& vocab,
                                      std::span<const LabeledExample> examples,
                                      std::size_t max_len) {
  check_vocab(model, vocab);
  return predict_proba(model, encode_examples(vocab, examples,
                                              std::min(max_len, model.config.max_seq_len)));
}

std::vector<Sentiment> predict_labels(std::span<const ProbTriple> probs) {
  std::vector<Sentiment> out;
  out.reserve(probs.size());
  for (const ProbTriple& p : probs) out.push_back(sentiment_from_index(argmax(p)));
  return out;
}

std::vector<Sentiment> labels_of(std::span<const LabeledExample> data) {
  std::vector<Sentiment> out;
  out.reserve(data.size());
  for (const LabeledExample& ex : data) out.push_back(ex.label);
  return out;
}

EvalReport evaluate_model(const SentimentModel& model, const Vocab& vocab,
                          std::span<const LabeledExample> data, std::size_t max_len,
                          std::string name) {
  const std::vector<ProbTriple> probs = predict_proba(model, vocab, data, max_len);
  return compute_metrics(labels_of(data), predict_labels(probs), std::move(name));
}

void write_history_jsonl(std::ostream& out, std::span<const EpochRecord> history) {
  for (const EpochRecord& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["valid_macro_f1"] = r.valid_macro_f1;
    out << j.dump() << '\n';
  }
}

}  // namespace msnt
