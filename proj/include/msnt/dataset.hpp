#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msnt/labels.hpp"

namespace msnt {

struct LabeledExample {
  std::string text;
  Sentiment label = Sentiment::neutral;
  // Position in the source dataset; used to check split disjointness.
  std::size_t id = 0;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  std::string source;
  std::uint64_t seed = 0;
};

enum class DatasetFormat { jsonl, csv };

// Throws DataError listing up to 20 offending records with line numbers.
std::vector<LabeledExample> parse_dataset(std::string_view contents, DatasetFormat format);
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, DatasetFormat format);
// Picks the format from the file extension (.csv, otherwise JSONL).
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path);

void write_jsonl(std::ostream& out, std::span<const LabeledExample> data);
void save_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> data);

bool is_valid_utf8(std::string_view s);

inline constexpr std::array<double, 3> kDefaultSplitRatios = {0.63, 0.07, 0.30};

// Stratified by label and deterministic per seed. Each stratum contributes
// round(n * ratio) examples to train and validation, the remainder to test.
DatasetSplit split_dataset(std::span<const LabeledExample> data,
                           std::array<double, 3> ratios = kDefaultSplitRatios,
                           std::uint64_t seed = 0);

}  // namespace msnt
