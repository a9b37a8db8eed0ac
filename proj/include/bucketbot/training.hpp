#pragma once

#include <optional>

#include "bucketbot/model.hpp"

namespace bucketbot {

struct TrainSpec {
  ModelKind kind = ModelKind::RandomForest;
  std::size_t n_trees = 25;
  std::uint64_t seed = 0;
  ForestParams forest;
  double alpha = 1.0;
  VocabularyOptions vocabulary;
  std::optional<ClassThresholds> thresholds;  // lexicon scorers; default per kind
};

// Lexicon scorers ignore the corpus and use `lexicon` (AFINN-style or VADER
// depending on kind); trainable models ignore `lexicon`.
inline Model train_model(const AnnotatedCorpus& train, const TrainSpec& spec, const Lexicon& lexicon = {}) {
  switch (spec.kind) {
    case ModelKind::RandomForest: {
      const auto vocab = build_vocabulary(train, spec.vocabulary);
      return Model(train_random_forest(train, vocab, spec.n_trees, spec.seed, spec.forest));
    }
    case ModelKind::NaiveBayes: {
      const auto vocab = build_vocabulary(train, spec.vocabulary);
      return Model(train_naive_bayes(train, vocab, spec.alpha));
    }
    case ModelKind::Afinn:
    case ModelKind::Vader: {
      LexiconScorerConfig cfg;
      cfg.kind = spec.kind == ModelKind::Afinn ? LexiconScorerKind::Afinn : LexiconScorerKind::Vader;
      cfg.lexicon = lexicon;
      cfg.thresholds = spec.thresholds.value_or(spec.kind == ModelKind::Afinn ? kDefaultAfinnThresholds
                                                                             : kDefaultVaderThresholds);
      return Model(LexiconScorer(std::move(cfg)));
    }
  }
  throw Error("unknown model kind");
}

}  // namespace bucketbot
