#include "msnt/labels.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace msnt {

std::string_view to_string(Sentiment label) {
  switch (label) {
    case Sentiment::negative: return "negative";
    case Sentiment::neutral: return "neutral";
    case Sentiment::positive: return "positive";
  }
  return "invalid";
}

std::optional<Sentiment> parse_sentiment(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Sentiment s : kLabelOrder) {
    if (lowered == to_string(s)) return s;
  }
  return std::nullopt;
}

Sentiment sentiment_from_index(std::size_t index) {
  if (index >= kNumClasses) throw std::out_of_range("class index " + std::to_string(index));
  return kLabelOrder[index];
}

std::size_t argmax(const ProbTriple& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

}  // namespace msnt
