#include "msnt/metrics.hpp"

#include "msnt/tensor.hpp"

namespace msnt {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) n += v;
  }
  return n;
}

std::size_t ConfusionMatrix::true_positives(Sentiment c) const {
  return counts[index_of(c)][index_of(c)];
}

std::size_t ConfusionMatrix::false_positives(Sentiment c) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    if (t != index_of(c)) n += counts[t][index_of(c)];
  }
  return n;
}

std::size_t ConfusionMatrix::false_negatives(Sentiment c) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < kNumClasses; ++p) {
    if (p != index_of(c)) n += counts[index_of(c)][p];
  }
  return n;
}

double precision(std::size_t tp, std::size_t fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::size_t tp, std::size_t fn) {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1_score(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * r * p / (r + p); }

ConfusionMatrix confusion_matrix(std::span<const Sentiment> truth,
                                 std::span<const Sentiment> predicted) {
  if (truth.size() != predicted.size()) {
    throw ContractError("metrics: " + std::to_string(truth.size()) + " truth labels but " +
                        std::to_string(predicted.size()) + " predictions");
  }
  if (truth.empty()) throw ContractError("metrics: no examples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!is_valid(truth[i]) || !is_valid(predicted[i])) {
      throw ContractError("metrics: unknown label at index " + std::to_string(i));
    }
    ++cm.counts[index_of(truth[i])][index_of(predicted[i])];
  }
  return cm;
}

EvalReport compute_metrics(std::span<const Sentiment> truth, std::span<const Sentiment> predicted,
                           std::string model) {
  EvalReport report;
  report.model = std::move(model);
  report.confusion = confusion_matrix(truth, predicted);
  const ConfusionMatrix& cm = report.confusion;
  const double n = static_cast<double>(cm.total());
  std::size_t correct = 0;
  for (Sentiment c : kLabelOrder) {
    const std::size_t tp = cm.true_positives(c), fp = cm.false_positives(c),
                      fn = cm.false_negatives(c);
    ClassMetrics& m = report.per_class[index_of(c)];
    m.precision = precision(tp, fp);
    m.recall = recall(tp, fn);
    m.f1 = f1_score(m.precision, m.recall);
    m.support = tp + fn;
    if (tp + fp == 0 || tp + fn == 0) report.zero_division = true;
    correct += tp;
    report.macro.precision += m.precision / kNumClasses;
    report.macro.recall += m.recall / kNumClasses;
    report.macro.f1 += m.f1 / kNumClasses;
    const double w = static_cast<double>(m.support) / n;
    report.weighted.precision += w * m.precision;
    report.weighted.recall += w * m.recall;
    report.weighted.f1 += w * m.f1;
  }
  report.macro.support = cm.total();
  report.weighted.support = cm.total();
  report.accuracy = static_cast<double>(correct) / n;
  // Pooled over classes, every error is one FN, so micro recall is accuracy.
  std::size_t tp_sum = 0, fn_sum = 0;
  for (Sentiment c : kLabelOrder) {
    tp_sum += cm.true_positives(c);
    fn_sum += cm.false_negatives(c);
  }
  report.micro_recall = recall(tp_sum, fn_sum);
  return report;
}

namespace {

nlohmann::ordered_json metrics_json(const ClassMetrics& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["support"] = m.support;
  return j;
}

ClassMetrics metrics_from_json(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>(),
          j.at("support").get<std::size_t>()};
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model;
  nlohmann::ordered_json classes;
  for (Sentiment c : kLabelOrder) classes[std::string(to_string(c))] = metrics_json(report.of(c));
  j["per_class"] = classes;
  j["macro"] = metrics_json(report.macro);
  j["weighted"] = metrics_json(report.weighted);
  j["accuracy"] = report.accuracy;
  j["micro_recall"] = report.micro_recall;
  j["zero_division"] = report.zero_division;
  nlohmann::ordered_json cm = nlohmann::ordered_json::array();
  for (const auto& row : report.confusion.counts) cm.push_back(row);
  j["confusion"] = cm;
  nlohmann::ordered_json order = nlohmann::ordered_json::array();
  for (Sentiment c : kLabelOrder) order.push_back(std::string(to_string(c)));
  j["label_order"] = order;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  for (Sentiment c : kLabelOrder) {
    r.per_class[index_of(c)] = metrics_from_json(j.at("per_class").at(std::string(to_string(c))));
  }
  r.macro = metrics_from_json(j.at("macro"));
  r.weighted = metrics_from_json(j.at("weighted"));
  r.accuracy = j.at("accuracy").get<double>();
  r.micro_recall = j.at("micro_recall").get<double>();
  r.zero_division = j.at("zero_division").get<bool>();
  const auto& cm = j.at("confusion");
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      r.confusion.counts[t][p] = cm.at(t).at(p).get<std::size_t>();
    }
  }
  return r;
}

}  // namespace msnt
