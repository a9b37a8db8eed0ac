#pragma once

// Bagged forest of Gini decision trees over bag-of-words counts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <thread>
#include <vector>

#include "bucketbot/corpus.hpp"
#include "bucketbot/detail/util.hpp"
#include "bucketbot/sentiment_label.hpp"
#include "bucketbot/text_features.hpp"

namespace bucketbot {

using ClassHistogram = std::array<std::uint32_t, kNumLabels>;
using Distribution = std::array<double, kNumLabels>;

// Highest probability wins; ties go to the more negative class.
inline SentimentLabel argmax_label(const Distribution& d) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k)
    if (d[k] > d[best]) best = k;
  return label_from_index(best);
}

struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // samples with count >= threshold go right
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  ClassHistogram histogram{};  // leaves only

  bool is_leaf() const { return feature == kLeaf; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  const TreeNode& leaf_for(const BowVector& x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = x.count_of(static_cast<std::uint32_t>(n.feature)) >= n.threshold ? n.right : n.left;
    }
    return nodes_[i];
  }

  Distribution leaf_distribution(const BowVector& x) const {
    const auto& h = leaf_for(x).histogram;
    const double total = std::accumulate(h.begin(), h.end(), 0.0);
    Distribution d{};
    for (std::size_t k = 0; k < kNumLabels; ++k) d[k] = h[k] / total;
    return d;
  }

  // Structural checks used after deserialization.
  void validate(std::size_t vocab_size) const {
    if (nodes_.empty()) throw Error("tree has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.is_leaf()) {
        if (std::accumulate(n.histogram.begin(), n.histogram.end(), std::uint64_t{0}) == 0)
          throw Error("empty leaf histogram");
        continue;
      }
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= vocab_size)
        throw Error("split feature out of range");
      // Children always come after their parent, so every path terminates.
      if (n.left <= i || n.right <= i || n.left >= nodes_.size() || n.right >= nodes_.size())
        throw Error("bad child index");
    }
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestParams {
  // Features examined per node; 0 means ceil(sqrt(|V|)).
  std::size_t max_features = 0;
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  // 0 = use hardware concurrency. Results do not depend on it.
  unsigned threads = 0;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  Vocabulary vocab;
  std::uint64_t seed = 0;
  ForestParams params;

  std::size_t n_trees() const { return trees.size(); }

  Distribution predict_distribution(const BowVector& x) const {
    Distribution d{};
    for (const auto& tree : trees) {
      const auto leaf = tree.leaf_distribution(x);
      for (std::size_t k = 0; k < kNumLabels; ++k) d[k] += leaf[k];
    }
    for (auto& p : d) p /= static_cast<double>(trees.size());
    return d;
  }
};

namespace detail {

// Dense column-major count matrix, one column per vocabulary feature.
struct TrainingMatrix {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::vector<std::uint16_t> counts;     // counts[f * rows + r]
  std::vector<std::vector<BowEntry>> sparse_rows;
  std::vector<std::uint8_t> labels;

  std::uint16_t at(std::size_t row, std::size_t feature) const { return counts[feature * rows + row]; }
};

inline TrainingMatrix make_training_matrix(const AnnotatedCorpus& train, const Vocabulary& vocab) {
  TrainingMatrix m;
  m.rows = train.size();
  m.features = vocab.size();
  m.counts.assign(m.rows * m.features, 0);
  m.sparse_rows.reserve(m.rows);
  for (std::size_t r = 0; r < train.size(); ++r) {
    auto v = vectorize(train[r].text, vocab);
    for (const auto& e : v.entries)
      m.counts[e.index * m.rows + r] = static_cast<std::uint16_t>(std::min<std::uint32_t>(e.count, 0xffff));
    m.sparse_rows.push_back(std::move(v.entries));
    m.labels.push_back(static_cast<std::uint8_t>(index_of(train[r].label)));
  }
  return m;
}

inline double gini(const std::array<double, kNumLabels>& h, double n) {
  if (n <= 0) return 0.0;
  double s = 0.0;
  for (double c : h) s += (c / n) * (c / n);
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingMatrix& data, std::size_t max_features, std::size_t min_leaf, Rng rng)
      : data_(data),
        max_features_(max_features),
        min_leaf_(std::max<std::size_t>(min_leaf, 1)),
        rng_(std::move(rng)),
        mark_(data.features, 0) {}

  DecisionTree build(std::vector<std::uint32_t> samples) {
    nodes_.clear();
    grow(std::move(samples));
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Split {
    std::int32_t feature = TreeNode::kLeaf;
    double threshold = 0.0;
    double gain = 0.0;
  };

  std::uint32_t grow(std::vector<std::uint32_t> samples) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();

    ClassHistogram hist{};
    for (auto r : samples) ++hist[data_.labels[r]];
    const auto classes = std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; });

    Split best;
    if (classes > 1 && samples.size() >= 2 * min_leaf_) best = find_split(samples, hist);
    if (best.feature == TreeNode::kLeaf) {
      nodes_[id].histogram = hist;
      return id;
    }

    std::vector<std::uint32_t> left, right;
    for (auto r : samples)
      (data_.at(r, static_cast<std::size_t>(best.feature)) >= best.threshold ? right : left).push_back(r);
    samples.clear();
    samples.shrink_to_fit();

    const auto l = grow(std::move(left));
    const auto rr = grow(std::move(right));
    auto& node = nodes_[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  // Candidate features are drawn uniformly from those that vary within the
  // node. A node becomes a leaf only when no feature reduces impurity.
  Split find_split(const std::vector<std::uint32_t>& samples, const ClassHistogram& hist) {
    // Bucket the node's nonzero entries by feature (features in index order).
    std::vector<std::uint32_t> present;
    for (auto r : samples)
      for (const auto& e : data_.sparse_rows[r]) {
        if (!mark_[e.index]) present.push_back(e.index);
        ++mark_[e.index];
      }
    std::sort(present.begin(), present.end());
    std::vector<std::uint32_t> offset(present.size() + 1, 0);
    for (std::size_t i = 0; i < present.size(); ++i) {
      offset[i + 1] = offset[i] + mark_[present[i]];
      mark_[present[i]] = static_cast<std::uint32_t>(i);  // reused as slot lookup
    }
    std::vector<std::pair<std::uint16_t, std::uint8_t>> entries(offset.back());
    std::vector<std::uint32_t> fill(offset.begin(), offset.end() - 1);
    for (auto r : samples)
      for (const auto& e : data_.sparse_rows[r])
        entries[fill[mark_[e.index]]++] = {data_.at(r, e.index), data_.labels[r]};
    for (auto f : present) mark_[f] = 0;

    std::vector<std::uint32_t> varying;  // slots into `present`
    for (std::size_t i = 0; i < present.size(); ++i) {
      const auto begin = entries.begin() + offset[i], end = entries.begin() + offset[i + 1];
      const bool has_zero = static_cast<std::size_t>(end - begin) < samples.size();
      const bool mixed = std::any_of(begin, end, [&](const auto& e) { return e.first != begin->first; });
      if (has_zero || mixed) varying.push_back(static_cast<std::uint32_t>(i));
    }

    const double n = static_cast<double>(samples.size());
    std::array<double, kNumLabels> parent{};
    for (std::size_t k = 0; k < kNumLabels; ++k) parent[k] = hist[k];
    const double parent_gini = gini(parent, n);

    const std::size_t k_features = std::min(max_features_, varying.size());
    Split best;
    // Past the first k_features draws, keep drawing only while no feature
    // has reduced impurity yet.
    for (std::size_t pick = 0;
         pick < varying.size() && (pick < k_features || best.feature == TreeNode::kLeaf); ++pick) {
      // Partial Fisher-Yates draw without replacement.
      const std::size_t j = pick + rng_.below(varying.size() - pick);
      std::swap(varying[pick], varying[j]);
      const auto slot = varying[pick];
      const auto f = present[slot];
      const auto begin = entries.begin() + offset[slot], end = entries.begin() + offset[slot + 1];
      std::sort(begin, end);

      // Rows with a zero count form the lowest value group.
      std::array<double, kNumLabels> left = parent;
      for (auto it = begin; it != end; ++it) left[it->second] -= 1;
      std::array<double, kNumLabels> right = parent;
      for (std::size_t k = 0; k < kNumLabels; ++k) right[k] -= left[k];
      double nl = n - static_cast<double>(end - begin);
      double value = 0.0;
      auto it = begin;
      while (true) {
        if (it == end) break;
        const double next = it->first;
        if (nl > 0.0) {
          const double nr = n - nl;
          if (nl >= static_cast<double>(min_leaf_) && nr >= static_cast<double>(min_leaf_)) {
            const double gain = parent_gini - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
            if (gain > best.gain + 1e-12) {
              best.feature = static_cast<std::int32_t>(f);
              best.threshold = 0.5 * (value + next);
              best.gain = gain;
            }
          }
        }
        for (; it != end && it->first == next; ++it) {
          left[it->second] += 1;
          right[it->second] -= 1;
          nl += 1;
        }
        value = next;
      }
    }
    return best;
  }

  const TrainingMatrix& data_;
  std::size_t max_features_;
  std::size_t min_leaf_;
  Rng rng_;
  std::vector<std::uint32_t> mark_;
  std::vector<TreeNode> nodes_;
};

inline std::size_t default_max_features(std::size_t vocab_size) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(vocab_size))));
}

inline void require_two_classes(const AnnotatedCorpus& train) {
  if (train.empty()) throw ValidationError("training corpus is empty");
  const auto first = train.front().label;
  if (std::all_of(train.begin(), train.end(), [&](const auto& u) { return u.label == first; }))
    throw ValidationError("training corpus has a single class (" + std::string(to_name(first)) + ")");
}

}  // namespace detail

// Each tree sees a bootstrap sample drawn from a stream seeded by
// (seed, tree index), so the model does not depend on thread scheduling.
inline RandomForestModel train_random_forest(const AnnotatedCorpus& train, const Vocabulary& vocab,
                                             std::size_t n_trees, std::uint64_t seed,
                                             const ForestParams& params = {}) {
  if (n_trees == 0) throw ValidationError("a forest needs at least one tree");
  if (vocab.empty()) throw ValidationError("vocabulary is empty");
  if (params.min_leaf == 0) throw ValidationError("min_leaf must be at least 1");
  detail::require_two_classes(train);

  const auto data = detail::make_training_matrix(train, vocab);
  const std::size_t max_features =
      params.max_features ? params.max_features : detail::default_max_features(vocab.size());

  RandomForestModel model;
  model.vocab = vocab;
  model.seed = seed;
  model.params = params;
  model.trees.resize(n_trees);

  auto build_tree = [&](std::size_t t) {
    detail::Rng rng(seed, t);
    std::vector<std::uint32_t> samples(data.rows);
    if (params.bootstrap) {
      for (auto& s : samples) s = static_cast<std::uint32_t>(rng.below(data.rows));
    } else {
      std::iota(samples.begin(), samples.end(), 0u);
    }
    detail::TreeBuilder builder(data, max_features, params.min_leaf, std::move(rng));
    model.trees[t] = builder.build(std::move(samples));
  };

  unsigned workers = params.threads ? params.threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_trees)));
  if (workers == 1) {
    for (std::size_t t = 0; t < n_trees; ++t) build_tree(t);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t t = w; t < n_trees; t += workers) build_tree(t);
      }));
    for (auto& j : jobs) j.get();
  }
  return model;
}

}  // namespace bucketbot
