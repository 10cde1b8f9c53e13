#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msnt/dataset.hpp"
#include "msnt/pretrain.hpp"

namespace msnt {

struct SyntheticOptions {
  std::size_t num_train = 3000;
  std::size_t num_test = 600;
  // Defaults to num_train * 0.07 / 0.63, the train:validation proportion of
  // the default split.
  std::size_t num_validation = 0;
  // Share of sentences whose sentiment phrase comes from another class's
  // lexicon while the label stays put.
  double noise = 0.05;
  std::uint64_t seed = 0;
};

// Templated software-engineering sentences built around one sentiment phrase
// each. Classes are balanced to within one example per split and every
// sentence is unique across the three splits.
DatasetSplit generate_synthetic(const SyntheticOptions& options);
DatasetSplit generate_synthetic(std::size_t num_train, std::size_t num_test, std::uint64_t seed);

// Unlabeled documents of 2-5 related sentences for pretraining.
Corpus generate_synthetic_corpus(std::size_t num_documents, std::uint64_t seed);

// Words that occur only in one class's phrase bank, per class in label order.
std::vector<std::vector<std::string>> synthetic_marker_words();

}  // namespace msnt
