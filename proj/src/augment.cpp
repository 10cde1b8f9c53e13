#include "msnt/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "msnt/errors.hpp"

namespace msnt {

namespace {

bool is_word_byte(char ch) {
  const auto c = static_cast<unsigned char>(ch);
  if (c >= 0x80) return true;
  return !std::isspace(c) && !std::ispunct(c) && !std::iscntrl(c);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_single_word(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_word_byte);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string join(const std::vector<TextPiece>& pieces) {
  std::string out;
  for (const TextPiece& p : pieces) out += p.text;
  return out;
}

// Indices of the picked words, each kept with probability p, then the first
// `cap` of them.
std::vector<std::size_t> pick(const std::vector<std::size_t>& eligible, const AugmentPolicy& policy,
                              Rng& rng, std::size_t& selected) {
  std::vector<std::size_t> picked;
  for (std::size_t i : eligible) {
    if (rng.bernoulli(policy.probability)) picked.push_back(i);
  }
  selected = picked.size();
  if (picked.size() > policy.max_substitutions) picked.resize(policy.max_substitutions);
  return picked;
}

AugmentResult finish(const LabeledExample& original, std::vector<TextPiece>& pieces,
                     std::size_t selected, std::size_t substitutions) {
  AugmentResult r;
  r.selected = selected;
  r.substitutions = substitutions;
  r.example = original;
  const std::string text = join(pieces);
  if (text != original.text && !text.empty()) {
    r.example.text = text;
    r.status = AugmentStatus::ok;
  }
  return r;
}

}  // namespace

Thesaurus::Thesaurus(std::map<std::string, std::vector<std::string>> entries) {
  for (auto& [word, synonyms] : entries) {
    const std::string key = lower(word);
    if (!is_single_word(key)) throw DataError("thesaurus: '" + word + "' is not a single word");
    if (synonyms.empty()) throw DataError("thesaurus: '" + word + "' has no synonyms");
    for (const std::string& s : synonyms) {
      if (!is_single_word(s)) {
        throw DataError("thesaurus: synonym '" + s + "' of '" + word + "' is not a single word");
      }
    }
    if (synonyms.size() == 1 && lower(synonyms[0]) == key) {
      throw DataError("thesaurus: '" + word + "' maps only to itself");
    }
    entries_[key] = std::move(synonyms);
  }
}

Thesaurus Thesaurus::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("thesaurus: expected a JSON object");
  std::map<std::string, std::vector<std::string>> entries;
  for (const auto& [word, list] : j.items()) {
    if (!list.is_array()) throw DataError("thesaurus: entry '" + word + "' is not a list");
    std::vector<std::string> synonyms;
    for (const auto& s : list) {
      if (!s.is_string()) throw DataError("thesaurus: entry '" + word + "' has a non-string");
      synonyms.push_back(s.get<std::string>());
    }
    entries[word] = std::move(synonyms);
  }
  return Thesaurus(std::move(entries));
}

Thesaurus Thesaurus::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

const std::vector<std::string>* Thesaurus::find(std::string_view word) const {
  auto it = entries_.find(lower(word));
  return it == entries_.end() ? nullptr : &it->second;
}

std::string_view to_string(AugmentStrategy s) {
  switch (s) {
    case AugmentStrategy::thesaurus: return "thesaurus";
    case AugmentStrategy::embedding: return "embedding";
    case AugmentStrategy::backtranslate: return "backtranslate";
  }
  return "unknown";
}

std::optional<AugmentStrategy> parse_strategy(std::string_view text) {
  for (auto s : {AugmentStrategy::thesaurus, AugmentStrategy::embedding,
                 AugmentStrategy::backtranslate}) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

void AugmentPolicy::validate() const {
  if (!(probability > 0.0 && probability <= 1.0)) {
    throw ConfigError("augment: substitution probability must lie in (0, 1]");
  }
  if (max_substitutions == 0) throw ConfigError("augment: max_substitutions must be at least 1");
}

StubTranslator::StubTranslator(std::map<std::string, std::map<std::string, std::string>> dictionary) {
  for (auto& [lang, words] : dictionary) {
    auto& target = dictionary_[lang];
    for (auto& [from, to] : words) target[lower(from)] = to;
  }
}

StubTranslator StubTranslator::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("translator dictionary: expected a JSON object");
  std::map<std::string, std::map<std::string, std::string>> dict;
  for (const auto& [lang, words] : j.items()) {
    if (!words.is_object()) throw DataError("translator dictionary: '" + lang + "' is not a map");
    for (const auto& [from, to] : words.items()) {
      if (!to.is_string()) throw DataError("translator dictionary: non-string for '" + from + "'");
      dict[lang][from] = to.get<std::string>();
    }
  }
  return StubTranslator(std::move(dict));
}

StubTranslator StubTranslator::load(const std::filesystem::path& path) {
  return from_json(read_json(path));
}

std::string StubTranslator::translate(std::string_view text,
                                      std::string_view target_language) const {
  auto lang = dictionary_.find(target_language);
  if (lang == dictionary_.end()) {
    throw std::invalid_argument("stub translator has no '" + std::string(target_language) +
                                "' dictionary");
  }
  std::vector<TextPiece> pieces = split_words(text);
  for (TextPiece& p : pieces) {
    if (!p.is_word) continue;
    if (auto it = lang->second.find(lower(p.text)); it != lang->second.end()) p.text = it->second;
  }
  return join(pieces);
}

std::vector<TextPiece> split_words(std::string_view text) {
  std::vector<TextPiece> out;
  for (char c : text) {
    const bool word = is_word_byte(c);
    if (out.empty() || out.back().is_word != word) out.push_back({"", word});
    out.back().text += c;
  }
  return out;
}

AugmentResult augment_thesaurus(const LabeledExample& example, const Thesaurus& thesaurus,
                                const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  std::vector<TextPiece> pieces = split_words(example.text);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (pieces[i].is_word && thesaurus.find(pieces[i].text) != nullptr) eligible.push_back(i);
  }
  std::size_t selected = 0;
  const std::vector<std::size_t> picked = pick(eligible, policy, rng, selected);
  for (std::size_t i : picked) {
    const auto& synonyms = *thesaurus.find(pieces[i].text);
    pieces[i].text = synonyms[rng.uniform_index(synonyms.size())];
  }
  return finish(example, pieces, selected, picked.size());
}

bool is_substitutable_token(const Vocab& vocab, std::size_t id) {
  if (id >= vocab.size() || Vocab::is_special(id)) return false;
  const std::string& t = vocab.token(id);
  return vocab.is_whole_word(id) && is_single_word(t) && lower(t) == t;
}

std::optional<std::size_t> nearest_neighbor(const SentimentModel& model, const Vocab& vocab,
                                            std::size_t token_id) {
  const Tensor& table = model.token_embedding;
  if (table.rows() != vocab.size()) {
    throw ConfigError("nearest_neighbor: embedding rows differ from vocabulary size");
  }
  if (token_id >= vocab.size()) throw IndexError("nearest_neighbor: token id out of range");
  const std::size_t width = table.cols();
  const auto data = table.data();
  auto norm = [&](std::size_t row) {
    double s = 0.0;
    for (std::size_t k = 0; k < width; ++k) s += data[row * width + k] * data[row * width + k];
    return std::sqrt(s);
  };
  const double self_norm = norm(token_id);
  if (self_norm == 0.0) return std::nullopt;
  std::optional<std::size_t> best;
  double best_cos = -2.0;
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (id == token_id || !is_substitutable_token(vocab, id)) continue;
    const double n = norm(id);
    if (n == 0.0) continue;
    double dot = 0.0;
    for (std::size_t k = 0; k < width; ++k) dot += data[token_id * width + k] * data[id * width + k];
    const double cos = dot / (self_norm * n);
    if (cos > best_cos) {
      best_cos = cos;
      best = id;
    }
  }
  return best;
}

AugmentResult augment_embedding(const LabeledExample& example, const SentimentModel& model,
                                const Vocab& vocab, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  if (vocab.size() < kNumSpecialTokens + 2) {
    throw ConfigError("augment_embedding: vocabulary needs at least 7 entries");
  }
  std::vector<TextPiece> pieces = split_words(example.text);
  std::vector<std::size_t> eligible;
  std::vector<std::size_t> ids(pieces.size(), 0);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!pieces[i].is_word) continue;
    if (auto id = vocab.find(lower(pieces[i].text)); id && is_substitutable_token(vocab, *id)) {
      ids[i] = *id;
      eligible.push_back(i);
    }
  }
  std::size_t selected = 0;
  const std::vector<std::size_t> picked = pick(eligible, policy, rng, selected);
  std::size_t done = 0;
  for (std::size_t i : picked) {
    if (auto nn = nearest_neighbor(model, vocab, ids[i])) {
      pieces[i].text = vocab.token(*nn);
      ++done;
    }
  }
  return finish(example, pieces, selected, done);
}

AugmentResult augment_backtranslate(const LabeledExample& example, const Translator& translator,
                                    std::string_view pivot_language, const AugmentPolicy& policy,
                                    std::string_view source_language) {
  policy.validate();
  AugmentResult r;
  r.example = example;
  try {
    const std::string pivot = translator.translate(example.text, pivot_language);
    const std::string back = translator.translate(pivot, source_language);
    if (back.empty()) {
      r.status = AugmentStatus::error;
      r.error = "translation came back empty";
      return r;
    }
    if (back != example.text) {
      r.example.text = back;
      r.status = AugmentStatus::ok;
    }
  } catch (const std::exception& e) {
    r.status = AugmentStatus::error;
    r.error = e.what();
  }
  return r;
}

AugmentSummary augment_dataset(std::span<const LabeledExample> data, const AugmentPolicy& policy,
                               const AugmentResources& resources, std::size_t multiplier) {
  policy.validate();
  if (multiplier == 0) throw ConfigError("augment: multiplier must be at least 1");
  switch (policy.strategy) {
    case AugmentStrategy::thesaurus:
      if (resources.thesaurus == nullptr) throw ConfigError("augment: thesaurus strategy needs a thesaurus");
      break;
    case AugmentStrategy::embedding:
      if (resources.model == nullptr || resources.vocab == nullptr) {
        throw ConfigError("augment: embedding strategy needs a model and vocabulary");
      }
      break;
    case AugmentStrategy::backtranslate:
      if (resources.translator == nullptr) throw ConfigError("augment: backtranslate needs a translator");
      break;
  }

  AugmentSummary summary;
  std::size_t next_id = 0;
  for (const LabeledExample& ex : data) next_id = std::max(next_id, ex.id + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LabeledExample& original = data[i];
    summary.data.push_back(original);
    std::vector<std::string> seen{original.text};
    for (std::size_t k = 0; k < multiplier; ++k) {
      Rng rng(derive_seed(policy.seed, i, k));
      AugmentResult r;
      switch (policy.strategy) {
        case AugmentStrategy::thesaurus:
          r = augment_thesaurus(original, *resources.thesaurus, policy, rng);
          break;
        case AugmentStrategy::embedding:
          r = augment_embedding(original, *resources.model, *resources.vocab, policy, rng);
          break;
        case AugmentStrategy::backtranslate:
          r = augment_backtranslate(original, *resources.translator, resources.pivot_language,
                                    policy, resources.source_language);
          break;
      }
      if (r.status == AugmentStatus::error) {
        ++summary.errors;
        summary.error_messages.push_back("example " + std::to_string(original.id) + ": " + r.error);
        continue;
      }
      if (r.status == AugmentStatus::noop) {
        ++summary.noops;
        continue;
      }
      if (std::find(seen.begin(), seen.end(), r.example.text) != seen.end()) {
        ++summary.duplicates;
        continue;
      }
      seen.push_back(r.example.text);
      r.example.label = original.label;
      r.example.id = next_id++;
      summary.data.push_back(std::move(r.example));
      ++summary.added;
    }
  }
  return summary;
}

}  // namespace msnt
