#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bucketbot {

// Base error for everything the library throws on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Five-point polarity scale. The numeric values give the total order.
enum class SentimentLabel : int {
  VeryNegative = 0,
  Negative = 1,
  Neutral = 2,
  Positive = 3,
  VeryPositive = 4,
};

inline constexpr std::size_t kNumLabels = 5;

inline constexpr std::array<SentimentLabel, kNumLabels> kAllLabels = {
    SentimentLabel::VeryNegative, SentimentLabel::Negative, SentimentLabel::Neutral,
    SentimentLabel::Positive, SentimentLabel::VeryPositive};

// Raw annotation value: a label, or the annotator declined (Skip).
// An empty optional is Skip.
using AnnotationLabel = std::optional<SentimentLabel>;

constexpr std::size_t index_of(SentimentLabel label) { return static_cast<std::size_t>(label); }

constexpr SentimentLabel label_from_index(std::size_t i) {
  if (i >= kNumLabels) throw std::out_of_range("label index out of range");
  return static_cast<SentimentLabel>(i);
}

constexpr int polarity_sign(SentimentLabel label) {
  switch (label) {
    case SentimentLabel::VeryNegative:
    case SentimentLabel::Negative:
      return -1;
    case SentimentLabel::Neutral:
      return 0;
    case SentimentLabel::Positive:
    case SentimentLabel::VeryPositive:
      return 1;
  }
  return 0;
}

// ++ <-> --, + <-> -, 0 -> 0
constexpr SentimentLabel mirror(SentimentLabel label) {
  return label_from_index(kNumLabels - 1 - index_of(label));
}

// Merge the strong grades into the weak ones (++ -> +, -- -> -).
constexpr SentimentLabel collapse_to_three(SentimentLabel label) {
  switch (label) {
    case SentimentLabel::VeryNegative:
      return SentimentLabel::Negative;
    case SentimentLabel::VeryPositive:
      return SentimentLabel::Positive;
    default:
      return label;
  }
}

constexpr int class_distance(SentimentLabel a, SentimentLabel b) {
  const int d = static_cast<int>(a) - static_cast<int>(b);
  return d < 0 ? -d : d;
}

// Short schema tokens used in TSV files: -- - 0 + ++
constexpr std::string_view to_token(SentimentLabel label) {
  constexpr std::array<std::string_view, kNumLabels> tokens = {"--", "-", "0", "+", "++"};
  return tokens[index_of(label)];
}

// Long names used in JSONL files and reports.
constexpr std::string_view to_name(SentimentLabel label) {
  constexpr std::array<std::string_view, kNumLabels> names = {
      "VeryNegative", "Negative", "Neutral", "Positive", "VeryPositive"};
  return names[index_of(label)];
}

// Human-readable names used in the report tables.
constexpr std::string_view to_display(SentimentLabel label) {
  constexpr std::array<std::string_view, kNumLabels> names = {
      "Very negative", "Negative", "Neutral", "Positive", "Very positive"};
  return names[index_of(label)];
}

inline constexpr std::string_view kSkipToken = "skip";
inline constexpr std::string_view kSkipName = "Skip";

inline std::optional<SentimentLabel> label_from_token(std::string_view token) {
  for (auto label : kAllLabels)
    if (to_token(label) == token) return label;
  return std::nullopt;
}

inline std::optional<SentimentLabel> label_from_name(std::string_view name) {
  for (auto label : kAllLabels)
    if (to_name(label) == name) return label;
  return std::nullopt;
}

// Parses a TSV label column that may also hold the skip marker.
// Returns nullopt for unknown tokens; the outer optional is "parsed",
// the inner one is "not skipped".
inline std::optional<AnnotationLabel> annotation_from_token(std::string_view token) {
  if (token == kSkipToken) return AnnotationLabel{};
  if (auto label = label_from_token(token)) return AnnotationLabel{*label};
  return std::nullopt;
}

inline std::string annotation_to_token(const AnnotationLabel& label) {
  return label ? std::string(to_token(*label)) : std::string(kSkipToken);
}

}  // namespace bucketbot
