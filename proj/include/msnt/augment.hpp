#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msnt/dataset.hpp"
#include "msnt/model.hpp"
#include "msnt/random.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt {

// Lowercase word -> synonyms. Throws DataError on multi-word entries, empty
// synonym lists, or a word whose only synonym is itself.
class Thesaurus {
 public:
  Thesaurus() = default;
  explicit Thesaurus(std::map<std::string, std::vector<std::string>> entries);
  static Thesaurus from_json(const nlohmann::json& j);
  static Thesaurus load(const std::filesystem::path& path);

  const std::vector<std::string>* find(std::string_view word) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

enum class AugmentStrategy { thesaurus, embedding, backtranslate };

std::string_view to_string(AugmentStrategy s);
std::optional<AugmentStrategy> parse_strategy(std::string_view text);

struct AugmentPolicy {
  AugmentStrategy strategy = AugmentStrategy::thesaurus;
  // Chance that each eligible word is picked.
  double probability = 0.1;
  std::size_t max_substitutions = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class AugmentStatus { ok, noop, error };

struct AugmentResult {
  LabeledExample example;
  AugmentStatus status = AugmentStatus::noop;
  // Words picked before the cap was applied.
  std::size_t selected = 0;
  std::size_t substitutions = 0;
  std::string error;
};

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(std::string_view text, std::string_view target_language) const = 0;
};

// Word-for-word dictionary translation. `dictionary[lang][word]` is the
// rendering of `word` in `lang`; unknown words pass through unchanged.
class StubTranslator : public Translator {
 public:
  explicit StubTranslator(std::map<std::string, std::map<std::string, std::string>> dictionary);
  static StubTranslator from_json(const nlohmann::json& j);
  static StubTranslator load(const std::filesystem::path& path);

  // Throws std::invalid_argument for a language with no sub-map.
  std::string translate(std::string_view text, std::string_view target_language) const override;

 private:
  std::map<std::string, std::map<std::string, std::string>, std::less<>> dictionary_;
};

// Splits text into alternating word / separator pieces; concatenating the
// pieces gives back the text. Word characters match basic_tokenize.
struct TextPiece {
  std::string text;
  bool is_word = false;
};
std::vector<TextPiece> split_words(std::string_view text);

AugmentResult augment_thesaurus(const LabeledExample& example, const Thesaurus& thesaurus,
                                const AugmentPolicy& policy, Rng& rng);

// Cosine-nearest replacement among whole-word, non-special vocabulary tokens
// other than `token_id`; ties go to the lowest id. nullopt when no candidate
// has a nonzero embedding.
std::optional<std::size_t> nearest_neighbor(const SentimentModel& model, const Vocab& vocab,
                                            std::size_t token_id);
// Whether a token may be substituted in or out by embedding augmentation.
bool is_substitutable_token(const Vocab& vocab, std::size_t id);

AugmentResult augment_embedding(const LabeledExample& example, const SentimentModel& model,
                                const Vocab& vocab, const AugmentPolicy& policy, Rng& rng);

// translate(translate(text, pivot), source). A throwing or empty translation
// yields status error with the original example.
AugmentResult augment_backtranslate(const LabeledExample& example, const Translator& translator,
                                    std::string_view pivot_language, const AugmentPolicy& policy,
                                    std::string_view source_language = "en");

struct AugmentResources {
  const Thesaurus* thesaurus = nullptr;
  const SentimentModel* model = nullptr;
  const Vocab* vocab = nullptr;
  const Translator* translator = nullptr;
  std::string pivot_language = "es";
  std::string source_language = "en";
};

struct AugmentSummary {
  std::vector<LabeledExample> data;
  std::size_t added = 0;
  std::size_t noops = 0;
  std::size_t duplicates = 0;
  std::size_t errors = 0;
  std::vector<std::string> error_messages;
};

// Each original example followed by up to `multiplier` distinct variants.
// Variants identical to the original or an earlier variant are dropped.
AugmentSummary augment_dataset(std::span<const LabeledExample> data, const AugmentPolicy& policy,
                               const AugmentResources& resources, std::size_t multiplier);

}  // namespace msnt
