#pragma once

// Seeded corpus generators standing in for the proprietary interaction logs.

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "bucketbot/corpus.hpp"
#include "bucketbot/detail/util.hpp"

namespace bucketbot {

struct SignalCorpusOptions {
  std::size_t records = 1500;
  std::size_t signal_tokens_per_class = 5;  // 25 signal tokens over five classes
  std::size_t noise_vocabulary = 200;
  std::size_t noise_per_record = 6;
  std::uint64_t seed = 0;
};

// Each record holds exactly one signal token, which determines its class,
// plus uniformly drawn noise tokens. Classes are balanced.
inline AnnotatedCorpus generate_signal_corpus(const SignalCorpusOptions& opts) {
  auto name = [](const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, i);
    return std::string(buf);
  };
  detail::Rng rng(opts.seed);
  AnnotatedCorpus corpus;
  corpus.reserve(opts.records);
  for (std::size_t i = 0; i < opts.records; ++i) {
    const std::size_t k = i % kNumLabels;
    std::vector<std::string> words;
    words.push_back(name("sig", k * opts.signal_tokens_per_class + rng.below(opts.signal_tokens_per_class)));
    for (std::size_t j = 0; j < opts.noise_per_record; ++j) words.push_back(name("w", rng.below(opts.noise_vocabulary)));
    rng.shuffle(words);
    AnnotatedUtterance u;
    u.text = join_tokens(words);
    u.label = label_from_index(k);
    corpus.push_back(std::move(u));
  }
  return corpus;
}

struct DialogueCorpusOptions {
  std::size_t records = 1400;
  std::uint64_t seed = 0;
  // Approximate class shares (VeryNegative .. VeryPositive); Neutral-heavy
  // like real socialbot traffic.
  std::array<double, kNumLabels> class_shares{0.03, 0.07, 0.48, 0.35, 0.07};
  double ambiguous_rate = 0.05;
};

namespace detail {

struct DialogueLexicon {
  std::array<std::vector<const char*>, kNumLabels> words{{
      {"awful", "horrible", "terrible", "disgusting", "miserable", "hate"},
      {"sad", "boring", "annoying", "bad", "upset", "tired", "lonely"},
      {"table", "weather", "movie", "train", "music", "book", "game", "dog", "news", "film"},
      {"good", "nice", "fun", "cool", "happy", "glad", "like", "enjoy"},
      {"amazing", "awesome", "wonderful", "fantastic", "love", "excellent"},
  }};
  std::array<std::vector<const char*>, kNumLabels> templates{{
      {"that is {w}", "this is {w}", "you are {w}", "i feel {w} today", "what a {w} day"},
      {"i am {w}", "that was a bit {w}", "it is {w}", "feeling {w}", "so {w}"},
      {"tell me about the {w}", "what is the {w}", "do you know any {w}", "talk about {w}",
       "i want to hear about the {w}", "what do you think of the {w}", "{w}"},
      {"that is {w}", "i {w} it", "it was {w}", "you are {w}", "i am {w}"},
      {"that is {w}", "i {w} this", "you are {w}", "this is {w}", "what an {w} idea"},
  }};
};

}  // namespace detail

// Template utterances with class-specific opinion words; used by
// `prepare --generate` when no annotated corpus is at hand.
inline AnnotatedCorpus generate_dialogue_corpus(const DialogueCorpusOptions& opts) {
  static const detail::DialogueLexicon lex;
  detail::Rng rng(opts.seed);
  AnnotatedCorpus corpus;
  corpus.reserve(opts.records);
  for (std::size_t i = 0; i < opts.records; ++i) {
    double u = rng.unit(), acc = 0.0;
    std::size_t k = kNumLabels - 1;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      acc += opts.class_shares[c];
      if (u < acc) {
        k = c;
        break;
      }
    }
    std::string text = lex.templates[k][rng.below(lex.templates[k].size())];
    const std::string word = lex.words[k][rng.below(lex.words[k].size())];
    text.replace(text.find("{w}"), 3, word);
    AnnotatedUtterance rec;
    rec.text = std::move(text);
    rec.label = label_from_index(k);
    rec.annotator_id = "annotator" + std::to_string(1 + i % 7);
    rec.ambiguous = rng.unit() < opts.ambiguous_rate;
    corpus.push_back(std::move(rec));
  }
  return corpus;
}

}  // namespace bucketbot
