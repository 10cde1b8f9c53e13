#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace msnt {

// Global label order; every module indexes classes this way.
enum class Sentiment : unsigned char { negative = 0, neutral = 1, positive = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Sentiment, kNumClasses> kLabelOrder = {
    Sentiment::negative, Sentiment::neutral, Sentiment::positive};

using ProbTriple = std::array<double, kNumClasses>;

std::string_view to_string(Sentiment label);
// Case-insensitive; rejects anything but the three full names.
std::optional<Sentiment> parse_sentiment(std::string_view text);

inline std::size_t index_of(Sentiment label) { return static_cast<std::size_t>(label); }
inline bool is_valid(Sentiment label) { return index_of(label) < kNumClasses; }
Sentiment sentiment_from_index(std::size_t index);

// Lowest index wins ties.
std::size_t argmax(const ProbTriple& p);

}  // namespace msnt
