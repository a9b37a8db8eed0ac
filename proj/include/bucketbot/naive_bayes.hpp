#pragma once

// Multinomial Naive Bayes with additive smoothing.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "bucketbot/corpus.hpp"
#include "bucketbot/random_forest.hpp"
#include "bucketbot/text_features.hpp"

namespace bucketbot {

struct NaiveBayesModel {
  // log P(class); -inf for classes absent from training.
  std::array<double, kNumLabels> log_priors{};
  // log_likelihoods[token][class] = log P(token | class).
  std::vector<std::array<double, kNumLabels>> log_likelihoods;
  double alpha = 1.0;
  Vocabulary vocab;

  Distribution predict_distribution(const BowVector& x) const {
    std::array<double, kNumLabels> score = log_priors;
    for (const auto& e : x.entries)
      for (std::size_t k = 0; k < kNumLabels; ++k)
        if (std::isfinite(score[k])) score[k] += e.count * log_likelihoods[e.index][k];
    double top = -std::numeric_limits<double>::infinity();
    for (double s : score) top = std::max(top, s);
    Distribution d{};
    double z = 0.0;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      d[k] = std::isfinite(score[k]) ? std::exp(score[k] - top) : 0.0;
      z += d[k];
    }
    for (auto& p : d) p /= z;
    return d;
  }
};

inline NaiveBayesModel train_naive_bayes(const AnnotatedCorpus& train, const Vocabulary& vocab,
                                         double alpha = 1.0) {
  if (!(alpha > 0.0)) throw ValidationError("smoothing alpha must be positive");
  if (vocab.empty()) throw ValidationError("vocabulary is empty");
  detail::require_two_classes(train);

  std::array<double, kNumLabels> class_docs{};
  std::array<double, kNumLabels> class_tokens{};
  std::vector<std::array<double, kNumLabels>> token_counts(vocab.size());
  for (const auto& u : train) {
    const auto k = index_of(u.label);
    class_docs[k] += 1;
    for (const auto& e : vectorize(u.text, vocab).entries) {
      token_counts[e.index][k] += e.count;
      class_tokens[k] += e.count;
    }
  }

  NaiveBayesModel model;
  model.alpha = alpha;
  model.vocab = vocab;
  const double n_docs = static_cast<double>(train.size());
  const double v = static_cast<double>(vocab.size());
  for (std::size_t k = 0; k < kNumLabels; ++k)
    model.log_priors[k] = class_docs[k] > 0 ? std::log(class_docs[k] / n_docs)
                                            : -std::numeric_limits<double>::infinity();
  model.log_likelihoods.resize(vocab.size());
  for (std::size_t t = 0; t < vocab.size(); ++t)
    for (std::size_t k = 0; k < kNumLabels; ++k)
      model.log_likelihoods[t][k] =
          std::log((token_counts[t][k] + alpha) / (class_tokens[k] + alpha * v));
  return model;
}

}  // namespace bucketbot
