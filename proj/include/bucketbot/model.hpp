#pragma once

// One interface over the four sentiment models, plus the versioned model
// artifact format.

#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include "bucketbot/lexicon_scorer.hpp"
#include "bucketbot/naive_bayes.hpp"
#include "bucketbot/random_forest.hpp"

namespace bucketbot {

struct Prediction {
  SentimentLabel label = SentimentLabel::Neutral;
  Distribution distribution{};
};

enum class ModelKind { RandomForest, NaiveBayes, Afinn, Vader };

constexpr std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::RandomForest:
      return "random_forest";
    case ModelKind::NaiveBayes:
      return "naive_bayes";
    case ModelKind::Afinn:
      return "afinn";
    case ModelKind::Vader:
      return "vader";
  }
  return "";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
  for (auto k : {ModelKind::RandomForest, ModelKind::NaiveBayes, ModelKind::Afinn, ModelKind::Vader})
    if (to_string(k) == s) return k;
  if (s == "forest" || s == "rf") return ModelKind::RandomForest;
  if (s == "nb") return ModelKind::NaiveBayes;
  return std::nullopt;
}

class Model {
 public:
  using Variant = std::variant<RandomForestModel, NaiveBayesModel, LexiconScorer>;

  Model(RandomForestModel m) : impl_(std::move(m)) {}
  Model(NaiveBayesModel m) : impl_(std::move(m)) {}
  Model(LexiconScorer m) : impl_(std::move(m)) {}

  ModelKind kind() const {
    if (std::holds_alternative<RandomForestModel>(impl_)) return ModelKind::RandomForest;
    if (std::holds_alternative<NaiveBayesModel>(impl_)) return ModelKind::NaiveBayes;
    return std::get<LexiconScorer>(impl_).config().kind == LexiconScorerKind::Afinn ? ModelKind::Afinn
                                                                                    : ModelKind::Vader;
  }

  const Variant& variant() const { return impl_; }

  // Empty or all-OOV input yields the model's prior (forest: the leaves
  // reached by an empty vector; NB: class priors; lexicon: Neutral).
  Prediction predict(std::string_view text) const {
    const auto tokens = tokenize(text);
    return std::visit(
        [&](const auto& m) -> Prediction {
          using T = std::decay_t<decltype(m)>;
          Prediction p;
          if constexpr (std::is_same_v<T, LexiconScorer>) {
            p.label = lexicon_classify(m.score(tokens), m.config().thresholds);
            p.distribution[index_of(p.label)] = 1.0;
          } else {
            p.distribution = m.predict_distribution(vectorize_tokens(tokens, m.vocab));
            p.label = argmax_label(p.distribution);
          }
          return p;
        },
        impl_);
  }

  SentimentLabel classify(std::string_view text) const { return predict(text).label; }

 private:
  Variant impl_;
};

// ---------------------------------------------------------------------------
// Artifact format: a line-oriented text file.
//
//   BUCKETBOT-MODEL v1
//   kind <random_forest|naive_bayes|afinn|vader>
//   vocab <n>            followed by n tokens, one per line, in index order
//   ...kind-specific sections...
//   end
//
// Numbers use shortest round-trip formatting, so save(load(x)) == x.

inline constexpr std::string_view kModelMagic = "BUCKETBOT-MODEL";
inline constexpr std::string_view kModelVersion = "v1";

namespace detail {

inline void write_vocab(std::ostringstream& out, const Vocabulary& vocab) {
  out << "vocab " << vocab.size() << ' ' << vocab.max_size() << ' ' << vocab.min_frequency() << '\n';
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

inline void write_thresholds(std::ostringstream& out, const ClassThresholds& t) {
  out << "thresholds";
  for (double c : t.cuts) out << ' ' << format_double(c);
  out << ' ' << (t.allow_off_center ? 1 : 0) << '\n';
}

class ArtifactReader {
 public:
  explicit ArtifactReader(std::string_view data) : lines_(split(data, '\n')) {
    if (!lines_.empty() && lines_.back().empty()) lines_.pop_back();
  }

  std::string_view next_line() {
    if (pos_ >= lines_.size()) throw Error("model artifact is truncated");
    return lines_[pos_++];
  }

  // Next line as whitespace-separated fields, first field must be `key`.
  std::vector<std::string_view> expect(std::string_view key) {
    auto fields = split(next_line(), ' ');
    if (fields.empty() || fields.front() != key)
      throw Error("model artifact: expected '" + std::string(key) + "' at line " + std::to_string(pos_));
    fields.erase(fields.begin());
    return fields;
  }

  template <typename Int>
  Int integer(std::string_view s) {
    auto v = parse_int<Int>(s);
    if (!v) throw Error("model artifact: bad integer '" + std::string(s) + "' at line " + std::to_string(pos_));
    return *v;
  }

  double real(std::string_view s) {
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    auto v = parse_double(s);
    if (!v) throw Error("model artifact: bad number '" + std::string(s) + "' at line " + std::to_string(pos_));
    return *v;
  }

  void arity(const std::vector<std::string_view>& fields, std::size_t n) {
    if (fields.size() != n)
      throw Error("model artifact: wrong field count at line " + std::to_string(pos_));
  }

  Vocabulary vocab() {
    const auto f = expect("vocab");
    arity(f, 3);
    const auto n = integer<std::size_t>(f[0]);
    if (n > lines_.size()) throw Error("model artifact is truncated");
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) tokens.emplace_back(next_line());
    try {
      return Vocabulary(std::move(tokens), integer<std::size_t>(f[1]), integer<std::size_t>(f[2]));
    } catch (const ValidationError& e) {
      throw Error(std::string("model artifact: ") + e.what());
    }
  }

  ClassThresholds thresholds() {
    const auto f = expect("thresholds");
    arity(f, 5);
    ClassThresholds t;
    for (std::size_t i = 0; i < 4; ++i) t.cuts[i] = real(f[i]);
    t.allow_off_center = integer<int>(f[4]) != 0;
    return t;
  }

  bool done() const { return pos_ >= lines_.size(); }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
};

inline std::string format_log_prob(double v) { return std::isinf(v) ? "-inf" : format_double(v); }

}  // namespace detail

inline std::string save_model(const Model& model) {
  std::ostringstream out;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "kind " << to_string(model.kind()) << '\n';
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RandomForestModel>) {
          detail::write_vocab(out, m.vocab);
          out << "forest " << m.trees.size() << ' ' << m.seed << ' ' << m.params.max_features << ' '
              << m.params.min_leaf << ' ' << (m.params.bootstrap ? 1 : 0) << '\n';
          for (const auto& tree : m.trees) {
            out << "tree " << tree.nodes().size() << '\n';
            for (const auto& n : tree.nodes()) {
              if (n.is_leaf()) {
                out << 'L';
                for (auto c : n.histogram) out << ' ' << c;
              } else {
                out << "S " << n.feature << ' ' << detail::format_double(n.threshold) << ' ' << n.left
                    << ' ' << n.right;
              }
              out << '\n';
            }
          }
        } else if constexpr (std::is_same_v<T, NaiveBayesModel>) {
          detail::write_vocab(out, m.vocab);
          out << "alpha " << detail::format_double(m.alpha) << '\n';
          out << "priors";
          for (double p : m.log_priors) out << ' ' << detail::format_log_prob(p);
          out << '\n';
          for (const auto& row : m.log_likelihoods) {
            out << 'P';
            for (double p : row) out << ' ' << detail::format_log_prob(p);
            out << '\n';
          }
        } else {
          const auto& cfg = m.config();
          detail::write_vocab(out, Vocabulary{});
          detail::write_thresholds(out, cfg.thresholds);
          out << "lexicon " << cfg.lexicon.size() << '\n';
          for (const auto& e : cfg.lexicon) out << e.word << '\t' << detail::format_double(e.valence) << '\n';
        }
      },
      model.variant());
  out << "end\n";
  return out.str();
}

inline Model load_model_bytes(std::string_view data) {
  detail::ArtifactReader in(data);
  const auto header = detail::split(in.next_line(), ' ');
  if (header.size() != 2 || header[0] != kModelMagic) throw Error("not a model artifact (bad magic)");
  if (header[1] != kModelVersion)
    throw Error("unsupported model version '" + std::string(header[1]) + "' (expected " +
                std::string(kModelVersion) + ")");
  const auto kind_field = in.expect("kind");
  in.arity(kind_field, 1);
  const auto kind = model_kind_from_string(kind_field[0]);
  if (!kind) throw Error("unknown model kind '" + std::string(kind_field[0]) + "'");

  auto finish = [&](Model m) {
    in.expect("end");
    if (!in.done()) throw Error("model artifact: trailing data after 'end'");
    return m;
  };

  switch (*kind) {
    case ModelKind::RandomForest: {
      RandomForestModel m;
      m.vocab = in.vocab();
      const auto f = in.expect("forest");
      in.arity(f, 5);
      const auto n_trees = in.integer<std::size_t>(f[0]);
      if (n_trees == 0) throw Error("model artifact: forest has no trees");
      m.seed = in.integer<std::uint64_t>(f[1]);
      m.params.max_features = in.integer<std::size_t>(f[2]);
      m.params.min_leaf = in.integer<std::size_t>(f[3]);
      m.params.bootstrap = in.integer<int>(f[4]) != 0;
      for (std::size_t t = 0; t < n_trees; ++t) {
        const auto tf = in.expect("tree");
        in.arity(tf, 1);
        const auto n_nodes = in.integer<std::size_t>(tf[0]);
        if (n_nodes > data.size()) throw Error("model artifact is truncated");
        std::vector<TreeNode> nodes(n_nodes);
        for (auto& node : nodes) {
          const auto nf = detail::split(in.next_line(), ' ');
          if (!nf.empty() && nf[0] == "L") {
            in.arity(nf, 1 + kNumLabels);
            for (std::size_t k = 0; k < kNumLabels; ++k) node.histogram[k] = in.integer<std::uint32_t>(nf[k + 1]);
          } else if (!nf.empty() && nf[0] == "S") {
            in.arity(nf, 5);
            node.feature = in.integer<std::int32_t>(nf[1]);
            node.threshold = in.real(nf[2]);
            node.left = in.integer<std::uint32_t>(nf[3]);
            node.right = in.integer<std::uint32_t>(nf[4]);
          } else {
            throw Error("model artifact: bad tree node");
          }
        }
        DecisionTree tree(std::move(nodes));
        tree.validate(m.vocab.size());
        m.trees.push_back(std::move(tree));
      }
      return finish(Model(std::move(m)));
    }
    case ModelKind::NaiveBayes: {
      NaiveBayesModel m;
      m.vocab = in.vocab();
      const auto a = in.expect("alpha");
      in.arity(a, 1);
      m.alpha = in.real(a[0]);
      const auto p = in.expect("priors");
      in.arity(p, kNumLabels);
      for (std::size_t k = 0; k < kNumLabels; ++k) m.log_priors[k] = in.real(p[k]);
      m.log_likelihoods.resize(m.vocab.size());
      for (auto& row : m.log_likelihoods) {
        const auto rf = in.expect("P");
        in.arity(rf, kNumLabels);
        for (std::size_t k = 0; k < kNumLabels; ++k) row[k] = in.real(rf[k]);
      }
      return finish(Model(std::move(m)));
    }
    case ModelKind::Afinn:
    case ModelKind::Vader: {
      in.vocab();
      LexiconScorerConfig cfg;
      cfg.kind = *kind == ModelKind::Afinn ? LexiconScorerKind::Afinn : LexiconScorerKind::Vader;
      cfg.thresholds = in.thresholds();
      const auto lf = in.expect("lexicon");
      in.arity(lf, 1);
      const auto n = in.integer<std::size_t>(lf[0]);
      if (n > data.size()) throw Error("model artifact is truncated");
      for (std::size_t i = 0; i < n; ++i) {
        const auto cols = detail::split(in.next_line(), '\t');
        if (cols.size() != 2) throw Error("model artifact: bad lexicon entry");
        cfg.lexicon.push_back({std::string(cols[0]), in.real(cols[1])});
      }
      try {
        return finish(Model(LexiconScorer(std::move(cfg))));
      } catch (const ValidationError& e) {
        throw Error(std::string("model artifact: ") + e.what());
      }
    }
  }
  throw Error("unknown model kind");
}

inline void save_model(const Model& model, const std::string& path) {
  detail::write_file(path, save_model(model));
}

inline Model load_model(const std::string& path) { return load_model_bytes(detail::read_file(path)); }

}  // namespace bucketbot
