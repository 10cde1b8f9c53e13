#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include <json.hpp>

#include "msnt/labels.hpp"

namespace msnt {

// Rows are true labels, columns predicted labels, both in kLabelOrder.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t true_positives(Sentiment c) const;
  std::size_t false_positives(Sentiment c) const;
  std::size_t false_negatives(Sentiment c) const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  std::string model;
  std::array<ClassMetrics, kNumClasses> per_class{};
  ClassMetrics macro;
  ClassMetrics weighted;
  double accuracy = 0.0;
  double micro_recall = 0.0;
  ConfusionMatrix confusion;
  // Set when some precision or recall denominator was zero and the metric
  // fell back to 0.
  bool zero_division = false;

  const ClassMetrics& of(Sentiment c) const { return per_class[index_of(c)]; }
};

// TP / (TP + FP), or 0 when nothing was predicted.
double precision(std::size_t tp, std::size_t fp);
// TP / (TP + FN), or 0 when the class never occurs.
double recall(std::size_t tp, std::size_t fn);
// 2PR / (P + R), or 0 when P + R == 0.
double f1_score(double precision, double recall);

ConfusionMatrix confusion_matrix(std::span<const Sentiment> truth,
                                 std::span<const Sentiment> predicted);
// One-vs-rest precision/recall/F1 per class with macro and support-weighted
// averages. Throws ContractError on length mismatch or an invalid label.
EvalReport compute_metrics(std::span<const Sentiment> truth, std::span<const Sentiment> predicted,
                           std::string model = {});

// Full-precision JSON form of a report.
nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace msnt
