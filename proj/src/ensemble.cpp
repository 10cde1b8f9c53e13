#include "msnt/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "msnt/errors.hpp"
#include "msnt/finetune.hpp"

namespace msnt {

EnsembleSpec::EnsembleSpec(std::vector<EnsembleMember> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw ConfigError("ensemble: needs at least 2 members");
  double total = 0.0;
  for (const EnsembleMember& m : members_) {
    if (m.model == nullptr) throw ConfigError("ensemble: member '" + m.name + "' has no model");
    if (!std::isfinite(m.weight) || m.weight < 0.0) {
      throw ConfigError("ensemble: weight of '" + m.name + "' must be finite and nonnegative");
    }
    if (m.model->label_order != members_.front().model->label_order) {
      throw ConfigError("ensemble: member '" + m.name + "' uses a different label order");
    }
    total += m.weight;
  }
  if (!(total > 0.0)) throw ConfigError("ensemble: at least one weight must be positive");
  for (EnsembleMember& m : members_) m.weight /= total;
}

std::vector<double> EnsembleSpec::weights() const {
  std::vector<double> w;
  for (const EnsembleMember& m : members_) w.push_back(m.weight);
  return w;
}

std::vector<double> f1_proportional_weights(std::span<const double> f1_scores) {
  double total = 0.0;
  for (double f : f1_scores) {
    if (!(f >= 0.0)) throw ConfigError("ensemble: F1 weights must be nonnegative");
    total += f;
  }
  if (!(total > 0.0)) throw ConfigError("ensemble: every member has zero F1");
  std::vector<double> w;
  for (double f : f1_scores) w.push_back(f / total);
  return w;
}

Vote combine_votes(std::span<const ProbTriple> member_probs, std::span<const double> weights) {
  if (member_probs.size() != weights.size()) {
    throw ContractError("combine_votes: " + std::to_string(member_probs.size()) +
                        " distributions but " + std::to_string(weights.size()) + " weights");
  }
  Vote v;
  for (std::size_t m = 0; m < member_probs.size(); ++m) {
    for (std::size_t c = 0; c < kNumClasses; ++c) v.probs[c] += weights[m] * member_probs[m][c];
  }
  v.label = sentiment_from_index(argmax(v.probs));
  return v;
}

std::vector<Vote> ensemble_predict(const std::vector<std::vector<ProbTriple>>& member_probs,
                                   std::span<const double> weights) {
  if (member_probs.empty()) throw ContractError("ensemble_predict: no members");
  const std::size_t n = member_probs.front().size();
  for (const auto& p : member_probs) {
    if (p.size() != n) throw ContractError("ensemble_predict: members scored different counts");
  }
  std::vector<Vote> out;
  out.reserve(n);
  std::vector<ProbTriple> column(member_probs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < member_probs.size(); ++m) column[m] = member_probs[m][i];
    out.push_back(combine_votes(column, weights));
  }
  return out;
}

std::vector<Vote> ensemble_predict(const EnsembleSpec& spec,
                                   std::span<const TokenizedExample> examples) {
  std::vector<std::vector<ProbTriple>> probs;
  for (const EnsembleMember& m : spec.members()) probs.push_back(predict_proba(*m.model, examples));
  return ensemble_predict(probs, spec.weights());
}

Vote ensemble_predict(const EnsembleSpec& spec, const TokenizedExample& example) {
  return ensemble_predict(spec, std::span<const TokenizedExample>(&example, 1)).front();
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw ContractError("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> one_hot(std::span<const Sentiment> labels) {
  std::vector<double> out(labels.size() * kNumClasses, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i * kNumClasses + index_of(labels[i])] = 1.0;
  return out;
}

AgreementMatrix agreement_analysis(std::span<const std::vector<Sentiment>> predictions,
                                   std::vector<std::string> names) {
  const std::size_t k = predictions.size();
  if (k < 2) throw ContractError("agreement_analysis: needs at least 2 models");
  if (names.size() != k) throw ContractError("agreement_analysis: one name per model");
  const std::size_t n = predictions.front().size();
  if (n < 2) throw ContractError("agreement_analysis: needs at least 2 examples");
  for (const auto& p : predictions) {
    if (p.size() != n) throw ContractError("agreement_analysis: prediction counts differ");
  }
  AgreementMatrix m;
  m.names = std::move(names);
  m.agreement.assign(k, std::vector<double>(k, 1.0));
  m.correlation.assign(k, std::vector<std::optional<double>>(k));
  std::vector<std::vector<double>> encoded;
  for (const auto& p : predictions) encoded.push_back(one_hot(p));
  for (std::size_t a = 0; a < k; ++a) {
    m.correlation[a][a] = pearson(encoded[a], encoded[a]);
    for (std::size_t b = a + 1; b < k; ++b) {
      std::size_t same = 0;
      for (std::size_t i = 0; i < n; ++i) same += predictions[a][i] == predictions[b][i] ? 1 : 0;
      const double frac = static_cast<double>(same) / static_cast<double>(n);
      m.agreement[a][b] = m.agreement[b][a] = frac;
      m.correlation[a][b] = m.correlation[b][a] = pearson(encoded[a], encoded[b]);
    }
  }
  return m;
}

AgreementMatrix agreement_analysis(std::span<const EnsembleMember> models,
                                   std::span<const TokenizedExample> examples) {
  std::vector<std::vector<Sentiment>> predictions;
  std::vector<std::string> names;
  for (const EnsembleMember& m : models) {
    const auto probs = predict_proba(*m.model, examples);
    predictions.push_back(predict_labels(probs));
    names.push_back(m.name);
  }
  return agreement_analysis(predictions, std::move(names));
}

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

template <typename Cell>
void write_matrix(std::ostream& out, const std::vector<std::string>& names,
                  const std::vector<std::vector<Cell>>& values) {
  for (const std::string& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < names.size(); ++r) {
    out << names[r];
    for (const Cell& v : values[r]) {
      if constexpr (std::is_same_v<Cell, double>) {
        out << ',' << format_value(v);
      } else {
        out << ',' << (v ? format_value(*v) : std::string("undefined"));
      }
    }
    out << '\n';
  }
}

}  // namespace

void write_agreement_csv(std::ostream& out, const AgreementMatrix& m) {
  write_matrix(out, m.names, m.agreement);
}

void write_correlation_csv(std::ostream& out, const AgreementMatrix& m) {
  write_matrix(out, m.names, m.correlation);
}

void write_predictions_jsonl(std::ostream& out, std::span<const LabeledExample> data,
                             std::span<const Vote> votes) {
  if (data.size() != votes.size()) throw ContractError("predictions: count mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) {
    nlohmann::ordered_json j;
    j["text_id"] = data[i].id;
    j["label"] = std::string(to_string(votes[i].label));
    j["probs"] = votes[i].probs;
    out << j.dump() << '\n';
  }
}

}  // namespace msnt
