#pragma once

// Vocabulary construction and bag-of-words count vectors.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bucketbot/corpus.hpp"
#include "bucketbot/tokenizer.hpp"

namespace bucketbot {

struct VocabularyOptions {
  std::size_t max_size = 5000;
  std::size_t min_frequency = 1;
  // Empty by default. Negation words are never removed even if listed.
  std::unordered_set<std::string> stop_words;
};

inline const std::unordered_set<std::string>& protected_negation_tokens() {
  static const std::unordered_set<std::string> tokens = {"not", "no",      "never",
                                                         "none", "neither", "nor"};
  return tokens;
}

class Vocabulary {
 public:
  Vocabulary() = default;

  // Tokens in index order. Throws on duplicates or non-lowercase tokens.
  explicit Vocabulary(std::vector<std::string> tokens, std::size_t max_size = 0,
                      std::size_t min_frequency = 1)
      : tokens_(std::move(tokens)),
        max_size_(max_size == 0 ? tokens_.size() : max_size),
        min_frequency_(min_frequency) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty() || detail::to_lower(tokens_[i]) != tokens_[i])
        throw ValidationError("invalid vocabulary token '" + tokens_[i] + "'");
      if (!index_.emplace(tokens_[i], i).second)
        throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
    fingerprint_ = detail::fnv1a(join_tokens(tokens_));
  }

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::size_t max_size() const { return max_size_; }
  std::size_t min_frequency() const { return min_frequency_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  std::optional<std::size_t> index_of(const std::string& token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t max_size_ = 0;
  std::size_t min_frequency_ = 1;
  std::uint64_t fingerprint_ = detail::fnv1a("");
};

// Tokens ranked by frequency (desc) then lexicographically, after dropping
// those below min_frequency; truncated to max_size.
inline Vocabulary build_vocabulary(const AnnotatedCorpus& corpus, const VocabularyOptions& opts = {}) {
  if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& u : corpus)
    for (auto& t : tokenize(u.text)) ++counts[std::move(t)];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, n] : counts) {
    if (n < opts.min_frequency) continue;
    if (opts.stop_words.count(token) && !protected_negation_tokens().count(token)) continue;
    ranked.emplace_back(token, n);
  }
  if (ranked.empty()) throw ValidationError("every token was filtered out of the vocabulary");
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (opts.max_size > 0 && ranked.size() > opts.max_size) ranked.resize(opts.max_size);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, n] : ranked) tokens.push_back(std::move(token));
  return Vocabulary(std::move(tokens), opts.max_size, opts.min_frequency);
}

inline Vocabulary build_vocabulary(const AnnotatedCorpus& corpus, std::size_t max_size,
                                   std::size_t min_frequency) {
  VocabularyOptions opts;
  opts.max_size = max_size;
  opts.min_frequency = min_frequency;
  return build_vocabulary(corpus, opts);
}

struct BowEntry {
  std::uint32_t index = 0;
  std::uint32_t count = 0;

  friend bool operator==(const BowEntry&, const BowEntry&) = default;
};

// Sparse token counts; indices strictly increasing, counts positive.
struct BowVector {
  std::vector<BowEntry> entries;
  std::uint64_t vocabulary_fingerprint = 0;

  std::uint32_t count_of(std::uint32_t index) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), index,
                                     [](const BowEntry& e, std::uint32_t i) { return e.index < i; });
    return it != entries.end() && it->index == index ? it->count : 0;
  }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& e : entries) n += e.count;
    return n;
  }
  bool empty() const { return entries.empty(); }

  friend bool operator==(const BowVector&, const BowVector&) = default;
};

inline BowVector vectorize_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& t : tokens)
    if (auto i = vocab.index_of(t)) ++counts[static_cast<std::uint32_t>(*i)];
  BowVector v;
  v.vocabulary_fingerprint = vocab.fingerprint();
  v.entries.reserve(counts.size());
  for (const auto& [i, n] : counts) v.entries.push_back({i, n});
  return v;
}

// Out-of-vocabulary tokens are dropped.
inline BowVector vectorize(std::string_view text, const Vocabulary& vocab) {
  return vectorize_tokens(tokenize(text), vocab);
}

}  // namespace bucketbot
