#pragma once

// Shared helpers for the unit and acceptance tests: fixture paths, scratch
// directories and straightforward reference implementations that the
// library results are checked against.

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bucketbot/agreement.hpp"
#include "bucketbot/chat_service.hpp"
#include "bucketbot/corpus.hpp"
#include "bucketbot/evaluation.hpp"
#include "bucketbot/training.hpp"

namespace testing_support {

using namespace bucketbot;

inline std::string fixture(const std::string& name) { return std::string(BUCKETBOT_FIXTURE_DIR) + "/" + name; }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("bucketbot-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Kappa from a full contingency table with probabilities, the textbook way.
// Categories are the five labels plus Skip.
inline double oracle_kappa(const AnnotationOverlap& overlap, SkipMode mode) {
  double table[6][6] = {};
  double n = 0;
  for (const auto& p : overlap) {
    const int a = p.first ? static_cast<int>(*p.first) : 5;
    const int b = p.second ? static_cast<int>(*p.second) : 5;
    if (mode == SkipMode::IgnoreSkips && (a == 5 || b == 5)) continue;
    table[a][b] += 1;
    n += 1;
  }
  double po = 0, pe = 0;
  for (int i = 0; i < 5; ++i) po += table[i][i];  // skip/skip is never agreement
  po /= n;
  for (int i = 0; i < 6; ++i) {
    double row = 0, col = 0;
    for (int j = 0; j < 6; ++j) {
      row += table[i][j];
      col += table[j][i];
    }
    pe += (row / n) * (col / n);
  }
  return (po - pe) / (1 - pe);
}

inline AnnotationLabel random_annotation(std::mt19937_64& rng, double skip_rate) {
  if (std::uniform_real_distribution<double>(0, 1)(rng) < skip_rate) return std::nullopt;
  return static_cast<SentimentLabel>(std::uniform_int_distribution<int>(0, 4)(rng));
}

// Correlated annotator pairs so kappa spans a useful range.
inline AnnotationOverlap random_overlap(std::mt19937_64& rng) {
  const int n = std::uniform_int_distribution<int>(5, 60)(rng);
  const double agree = std::uniform_real_distribution<double>(0, 1)(rng);
  const double skip = std::uniform_real_distribution<double>(0, 0.2)(rng);
  AnnotationOverlap o;
  for (int i = 0; i < n; ++i) {
    AnnotationPair p;
    p.first = random_annotation(rng, skip);
    p.second = std::uniform_real_distribution<double>(0, 1)(rng) < agree ? p.first : random_annotation(rng, skip);
    o.push_back(p);
  }
  return o;
}

// Per-class precision/recall/F from an explicit 5x5 confusion matrix.
struct OracleReport {
  std::map<SentimentLabel, std::array<double, 3>> prf;
  std::map<SentimentLabel, std::size_t> support;
  double accuracy = 0;
  double weighted_f = 0;
};

inline OracleReport oracle_report(const std::vector<GoldPredicted>& preds) {
  long confusion[5][5] = {};
  for (const auto& [g, p] : preds) ++confusion[static_cast<int>(g)][static_cast<int>(p)];
  OracleReport r;
  long correct = 0, total = 0;
  double fsum = 0;
  for (int c = 0; c < 5; ++c) {
    long tp = confusion[c][c], col = 0, row = 0;
    for (int j = 0; j < 5; ++j) {
      col += confusion[j][c];
      row += confusion[c][j];
    }
    const double p = col ? double(tp) / double(col) : 0.0;
    const double rc = row ? double(tp) / double(row) : 0.0;
    const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
    const auto label = static_cast<SentimentLabel>(c);
    r.prf[label] = {p, rc, f};
    r.support[label] = static_cast<std::size_t>(row);
    correct += tp;
    total += row;
    fsum += f * double(row);
  }
  r.accuracy = double(correct) / double(total);
  r.weighted_f = fsum / double(total);
  return r;
}

// Prediction list whose Negative row has P = 5/10, R = 5/22 and whose
// VeryNegative row has P = R = 4/10.
inline std::vector<GoldPredicted> negative_rows_predictions() {
  using L = SentimentLabel;
  std::vector<GoldPredicted> p;
  auto add = [&](L gold, L pred, int n) {
    for (int i = 0; i < n; ++i) p.emplace_back(gold, pred);
  };
  add(L::Negative, L::Negative, 5);
  add(L::Negative, L::Neutral, 17);
  add(L::Neutral, L::Negative, 5);
  add(L::VeryNegative, L::VeryNegative, 4);
  add(L::VeryNegative, L::Neutral, 6);
  add(L::Neutral, L::VeryNegative, 6);
  add(L::Neutral, L::Neutral, 40);
  add(L::Positive, L::Positive, 12);
  return p;
}

// The fixture chat model: demo corpus plus lexicon-word samples, 25 trees.
inline Model train_fixture_model() {
  auto train = load_corpus(fixture("demo.tsv"));
  const auto samples = build_lexicon_samples(load_lexicon(fixture("vader.tsv"), LexiconKind::Vader));
  train.insert(train.end(), samples.begin(), samples.end());
  TrainSpec spec;
  spec.n_trees = 25;
  spec.seed = 7;
  return train_model(train, spec);
}

inline const std::shared_ptr<const Model>& shared_fixture_model() {
  static const auto m = std::make_shared<const Model>(train_fixture_model());
  return m;
}

inline ChatPipeline fixture_pipeline() {
  ChatPipeline p;
  p.model = shared_fixture_model();
  p.bots = load_bot_directory(fixture("bots"));
  p.gating = load_gating_config(fixture("gating.conf"));
  return p;
}

// Deterministic clock for exports that must compare byte for byte.
inline ChatService::Clock counting_clock() {
  auto t = std::make_shared<std::atomic<std::int64_t>>(1700000000000);
  return [t] { return t->fetch_add(1000); };
}

}  // namespace testing_support
