#pragma once

// Scalar-loop re-implementations used as independent oracles. None of these
// touch the tensor library.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "msnt/dataset.hpp"
#include "msnt/labels.hpp"
#include "msnt/model.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt::testing {

// classify() over the non-PAD prefix of `example`, with plain loops.
std::array<double, 3> reference_logits(const SentimentModel& model,
                                       const TokenizedExample& example);

struct OracleClass {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};
struct OracleMetrics {
  std::array<OracleClass, 3> per_class{};
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  double weighted_p = 0, weighted_r = 0, weighted_f1 = 0;
  double accuracy = 0;
};
OracleMetrics oracle_metrics(std::span<const Sentiment> truth, std::span<const Sentiment> pred);

// Normalizes raw weights, materializes the weighted sum, takes the first max.
std::size_t oracle_weighted_argmax(std::span<const ProbTriple> members,
                                   std::span<const double> raw_weights, ProbTriple* mixed = nullptr);

struct OracleAgreement {
  std::vector<std::vector<double>> agreement;
  std::vector<std::vector<std::optional<double>>> correlation;
};
OracleAgreement oracle_agreement(std::span<const std::vector<Sentiment>> predictions);

std::optional<std::size_t> oracle_nearest(const SentimentModel& model, const Vocab& vocab,
                                          std::size_t token_id);

// Multiclass perceptron over bag-of-marker-word counts; returns test accuracy.
double linear_probe_accuracy(std::span<const LabeledExample> train,
                             std::span<const LabeledExample> test,
                             const std::vector<std::vector<std::string>>& markers);

std::size_t closed_form_parameter_count(const EncoderConfig& c, ParameterScope scope);

}  // namespace msnt::testing
