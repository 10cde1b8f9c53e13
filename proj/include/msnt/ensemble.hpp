#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msnt/dataset.hpp"
#include "msnt/labels.hpp"
#include "msnt/model.hpp"

namespace msnt {

struct EnsembleMember {
  std::string name;
  const SentimentModel* model = nullptr;
  double weight = 1.0;
};

// Soft-voting ensemble. Weights are normalized to sum to 1 on construction.
class EnsembleSpec {
 public:
  // Throws ConfigError for fewer than 2 members, a negative or non-finite
  // weight, all-zero weights, or members with different label orders.
  explicit EnsembleSpec(std::vector<EnsembleMember> members);

  const std::vector<EnsembleMember>& members() const { return members_; }
  std::vector<double> weights() const;
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<EnsembleMember> members_;
};

// Weights proportional to each member's validation macro-F1.
std::vector<double> f1_proportional_weights(std::span<const double> f1_scores);

struct Vote {
  Sentiment label = Sentiment::neutral;
  ProbTriple probs{};
};

// Weighted mean of the member distributions; `weights` must already sum to 1.
Vote combine_votes(std::span<const ProbTriple> member_probs, std::span<const double> weights);

Vote ensemble_predict(const EnsembleSpec& spec, const TokenizedExample& example);
// Batched form over a whole dataset: one vote per example.
std::vector<Vote> ensemble_predict(const EnsembleSpec& spec,
                                   std::span<const TokenizedExample> examples);
// Same, from precomputed member probabilities [member][example].
std::vector<Vote> ensemble_predict(const std::vector<std::vector<ProbTriple>>& member_probs,
                                   std::span<const double> weights);

struct AgreementMatrix {
  std::vector<std::string> names;
  // Share of examples on which two models predict the same label.
  std::vector<std::vector<double>> agreement;
  // Pearson correlation of the flattened one-hot label vectors; nullopt when a
  // vector has zero variance.
  std::vector<std::vector<std::optional<double>>> correlation;
};

// Pearson coefficient of two equal-length samples; nullopt if either is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
// Flattened one-hot encoding of labels: 3 entries per example.
std::vector<double> one_hot(std::span<const Sentiment> labels);

AgreementMatrix agreement_analysis(std::span<const std::vector<Sentiment>> predictions,
                                   std::vector<std::string> names);
AgreementMatrix agreement_analysis(std::span<const EnsembleMember> models,
                                   std::span<const TokenizedExample> examples);

// Matrix CSV with a header row of model names; undefined entries print as "undefined".
void write_agreement_csv(std::ostream& out, const AgreementMatrix& m);
void write_correlation_csv(std::ostream& out, const AgreementMatrix& m);

// One JSON object per line: {"text_id", "label", "probs"}.
void write_predictions_jsonl(std::ostream& out, std::span<const LabeledExample> data,
                             std::span<const Vote> votes);

}  // namespace msnt
