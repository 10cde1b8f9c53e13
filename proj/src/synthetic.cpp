#include "msnt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <unordered_set>

#include "msnt/errors.hpp"
#include "msnt/random.hpp"
#include "msnt/tokenizer.hpp"

namespace msnt {

namespace {

// Phrase banks in label order. No content word is shared between classes.
const std::array<std::vector<std::string>, kNumClasses> kPhrases = {{
    {"keeps crashing", "is completely broken", "is terribly slow", "is a total mess",
     "fails every time", "is so frustrating", "is really buggy", "throws ugly exceptions",
     "is awful", "leaks memory constantly", "corrupts the data", "is a nightmare"},
    {"was updated", "is scheduled for review", "has two open tickets", "uses the default settings",
     "was moved into another module", "is described in the readme", "listens on port eight",
     "was renamed", "depends on the logger", "is tracked in jira", "reads the config file",
     "was merged"},
    {"works great", "is super clean", "looks awesome", "is blazing fast", "is nicely documented",
     "solved my problem", "is a huge improvement", "is elegant", "runs smoothly", "is excellent",
     "is a wonderful addition", "makes me happy"},
}};

const std::vector<std::string> kSubjects = {
    "the parser",  "this patch",   "the new api", "the test suite",       "the build",
    "this pull request", "the docs page", "the release", "the migration script", "the cli",
    "the refactor", "the compiler", "this commit", "the plugin"};

const std::vector<std::string> kContexts = {
    "after the last merge", "on the staging server", "in the latest release",
    "for the linux target", "since yesterday",       "with the default config",
    "on windows",           "in production",         "during code review",
    ""};

constexpr std::size_t kTemplates = 5;

std::string render(std::size_t tmpl, const std::string& subject, const std::string& phrase,
                   const std::string& context) {
  const std::string tail = context.empty() ? "" : " " + context;
  switch (tmpl) {
    case 0: return subject + " " + phrase + tail;
    case 1: return context.empty() ? subject + " " + phrase : context + ", " + subject + " " + phrase;
    case 2: return "i think " + subject + " " + phrase + tail;
    case 3: return "honestly " + subject + " " + phrase + ".";
    default: return "fyi " + subject + " " + phrase + tail + "!";
  }
}

class SentenceSource {
 public:
  explicit SentenceSource(std::uint64_t seed, double noise) : rng_(seed), noise_(noise) {}

  // A sentence for `label`; with probability `noise` its phrase comes from a
  // different class.
  std::string next(Sentiment label) {
    std::size_t bank = index_of(label);
    if (noise_ > 0.0 && rng_.bernoulli(noise_)) {
      bank = (bank + 1 + rng_.uniform_index(kNumClasses - 1)) % kNumClasses;
    }
    const auto& phrases = kPhrases[bank];
    const std::string& phrase = phrases[rng_.uniform_index(phrases.size())];
    const std::string& subject = kSubjects[rng_.uniform_index(kSubjects.size())];
    const std::string& context = kContexts[rng_.uniform_index(kContexts.size())];
    return render(rng_.uniform_index(kTemplates), subject, phrase, context);
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  double noise_;
};

std::vector<LabeledExample> make_split(std::size_t n, SentenceSource& source,
                                       std::unordered_set<std::string>& used,
                                       std::size_t& next_id) {
  std::vector<Sentiment> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(sentiment_from_index(i % kNumClasses));
  source.rng().shuffle(std::span<Sentiment>(labels));
  std::vector<LabeledExample> out;
  out.reserve(n);
  for (Sentiment label : labels) {
    std::string text;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == 1000) throw ConfigError("generate_synthetic: ran out of unique sentences");
      text = source.next(label);
      if (used.insert(text).second) break;
    }
    out.push_back({std::move(text), label, next_id++});
  }
  return out;
}

}  // namespace

DatasetSplit generate_synthetic(const SyntheticOptions& options) {
  if (options.num_train < 30 || options.num_test < 30) {
    throw ConfigError("generate_synthetic: train and test sizes must be at least 30");
  }
  if (!(options.noise >= 0.0 && options.noise < 1.0)) {
    throw ConfigError("generate_synthetic: noise must lie in [0, 1)");
  }
  const std::size_t num_valid =
      options.num_validation != 0
          ? options.num_validation
          : static_cast<std::size_t>(
                std::llround(static_cast<double>(options.num_train) * 0.07 / 0.63));
  SentenceSource source(derive_seed(options.seed, 0x73796e74), options.noise);
  std::unordered_set<std::string> used;
  std::size_t next_id = 0;
  DatasetSplit split;
  split.source = "synthetic";
  split.seed = options.seed;
  split.train = make_split(options.num_train, source, used, next_id);
  split.validation = make_split(std::max<std::size_t>(num_valid, kNumClasses), source, used, next_id);
  split.test = make_split(options.num_test, source, used, next_id);
  return split;
}

DatasetSplit generate_synthetic(std::size_t num_train, std::size_t num_test, std::uint64_t seed) {
  return generate_synthetic(
      SyntheticOptions{.num_train = num_train, .num_test = num_test, .seed = seed});
}

Corpus generate_synthetic_corpus(std::size_t num_documents, std::uint64_t seed) {
  if (num_documents < 2) throw ConfigError("generate_synthetic_corpus: need at least 2 documents");
  Rng rng(derive_seed(seed, 0x636f7270));
  Corpus corpus;
  for (std::size_t d = 0; d < num_documents; ++d) {
    // A document talks about one subject in one mood.
    const std::string& subject = kSubjects[rng.uniform_index(kSubjects.size())];
    const auto& phrases = kPhrases[rng.uniform_index(kNumClasses)];
    const std::size_t length = 2 + rng.uniform_index(4);
    Document doc;
    for (std::size_t s = 0; s < length; ++s) {
      const std::string& phrase = phrases[rng.uniform_index(phrases.size())];
      const std::string& context = kContexts[rng.uniform_index(kContexts.size())];
      doc.sentences.push_back(render(rng.uniform_index(kTemplates), subject, phrase, context));
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

std::vector<std::vector<std::string>> synthetic_marker_words() {
  std::set<std::string> shared;
  auto add_words = [](std::set<std::string>& into, const std::string& text) {
    for (std::string& w : basic_tokenize(text)) into.insert(std::move(w));
  };
  for (const std::string& s : kSubjects) add_words(shared, s);
  for (const std::string& c : kContexts) add_words(shared, c);
  for (std::size_t t = 0; t < kTemplates; ++t) add_words(shared, render(t, "", "", "x"));
  std::array<std::set<std::string>, kNumClasses> per_class;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (const std::string& p : kPhrases[c]) add_words(per_class[c], p);
  }
  std::vector<std::vector<std::string>> out(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (const std::string& w : per_class[c]) {
      bool unique = !shared.contains(w);
      for (std::size_t o = 0; o < kNumClasses && unique; ++o) {
        if (o != c && per_class[o].contains(w)) unique = false;
      }
      if (unique) out[c].push_back(w);
    }
  }
  return out;
}

}  // namespace msnt
