#pragma once

// Word-list baselines: AFINN-style sentence averaging and a VADER-lexicon
// mean-valence scorer (lexicon only, no rule engine).

#include <array>
#include <string>
#include <string_view>
#include <unordered_map>

#include "bucketbot/corpus.hpp"
#include "bucketbot/tokenizer.hpp"

namespace bucketbot {

// Cut-points t1 < t2 < t3 < t4 on the score axis:
// (-inf, t1) VeryNegative, [t1, t2) Negative, [t2, t3] Neutral,
// (t3, t4] Positive, (t4, inf) VeryPositive.
struct ClassThresholds {
  std::array<double, 4> cuts{};
  // Allows a Neutral band that does not straddle zero.
  bool allow_off_center = false;

  void validate() const {
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      if (!(cuts[i] < cuts[i + 1])) throw ValidationError("class thresholds must be strictly ascending");
    if (!allow_off_center && !(cuts[1] < 0.0 && 0.0 < cuts[2]))
      throw ValidationError("class thresholds must satisfy t2 < 0 < t3");
  }

  friend bool operator==(const ClassThresholds&, const ClassThresholds&) = default;
};

// Sentence averages on the AFINN [-5, 5] word scale.
inline constexpr ClassThresholds kDefaultAfinnThresholds{{-1.5, -0.25, 0.25, 1.5}};
// Mean valence scaled to [-1, 1].
inline constexpr ClassThresholds kDefaultVaderThresholds{{-0.5, -0.05, 0.05, 0.5}};

inline SentimentLabel lexicon_classify(double score, const ClassThresholds& t) {
  t.validate();
  const auto& c = t.cuts;
  if (score < c[0]) return SentimentLabel::VeryNegative;
  if (score < c[1]) return SentimentLabel::Negative;
  if (score <= c[2]) return SentimentLabel::Neutral;
  if (score <= c[3]) return SentimentLabel::Positive;
  return SentimentLabel::VeryPositive;
}

// Lookup table; the first entry wins when a word is listed twice.
class LexiconIndex {
 public:
  LexiconIndex() = default;
  explicit LexiconIndex(const Lexicon& lexicon) {
    for (const auto& e : lexicon) valences_.emplace(e.word, e.valence);
  }
  const double* find(const std::string& word) const {
    const auto it = valences_.find(word);
    return it == valences_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::string, double> valences_;
};

// Sum of the valences of lexicon words divided by the number of tokens in
// the sentence (all tokens, not only matched ones). 0 for empty input.
inline double afinn_score(const std::vector<std::string>& tokens, const LexiconIndex& index) {
  if (tokens.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : tokens)
    if (const double* v = index.find(t)) sum += *v;
  return sum / static_cast<double>(tokens.size());
}

inline double afinn_score(std::string_view text, const Lexicon& lexicon) {
  return afinn_score(tokenize(text), LexiconIndex(lexicon));
}

// Mean valence of matched words divided by 4, so always within [-1, 1].
inline double vader_lexicon_score(const std::vector<std::string>& tokens, const LexiconIndex& index) {
  double sum = 0.0;
  std::size_t matched = 0;
  for (const auto& t : tokens)
    if (const double* v = index.find(t)) {
      sum += *v;
      ++matched;
    }
  if (matched == 0) return 0.0;
  return sum / static_cast<double>(matched) / 4.0;
}

inline SentimentLabel vader_lexicon_classify(std::string_view text, const Lexicon& lexicon,
                                             const ClassThresholds& thresholds = kDefaultVaderThresholds) {
  return lexicon_classify(vader_lexicon_score(tokenize(text), LexiconIndex(lexicon)), thresholds);
}

enum class LexiconScorerKind { Afinn, Vader };

struct LexiconScorerConfig {
  LexiconScorerKind kind = LexiconScorerKind::Afinn;
  Lexicon lexicon;
  ClassThresholds thresholds = kDefaultAfinnThresholds;
};

class LexiconScorer {
 public:
  explicit LexiconScorer(LexiconScorerConfig config)
      : config_(std::move(config)), index_(config_.lexicon) {
    config_.thresholds.validate();
    const auto kind = config_.kind == LexiconScorerKind::Afinn ? LexiconKind::Afinn : LexiconKind::Vader;
    for (const auto& e : config_.lexicon) validate(e, kind);
  }

  const LexiconScorerConfig& config() const { return config_; }

  double score(const std::vector<std::string>& tokens) const {
    return config_.kind == LexiconScorerKind::Afinn ? afinn_score(tokens, index_)
                                                    : vader_lexicon_score(tokens, index_);
  }

  SentimentLabel classify(std::string_view text) const {
    return lexicon_classify(score(tokenize(text)), config_.thresholds);
  }

 private:
  LexiconScorerConfig config_;
  LexiconIndex index_;
};

}  // namespace bucketbot
