#pragma once

// Experiment matrix: model comparison, tree-count sweeps, 3-class collapse
// and lexicon augmentation, each row evaluated into a ClassificationReport.

#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bucketbot/evaluation.hpp"
#include "bucketbot/training.hpp"

namespace bucketbot {

enum class EvalMode {
  HoldOut,      // split the human corpus, train on one part, test on the other
  NoSplit,      // train (if trainable) and test on the whole human corpus
  CrossCorpus,  // train on the transfer corpus, test on the whole human corpus
};

enum class TrainingVariant {
  Human,                  // human-annotated records only
  HumanPlusLexicon,       // plus lexicon-word samples (train side only)
  HumanWithoutAmbiguous,  // records flagged ambiguous removed from training
};

struct ExperimentConfig {
  std::string name;
  TrainSpec model;
  std::size_t categories = 5;  // 5, or 3 after collapsing the strong grades
  TrainingVariant variant = TrainingVariant::Human;
  EvalMode mode = EvalMode::HoldOut;
  std::string note;  // dataset-use column
};

struct ExperimentData {
  AnnotatedCorpus human;
  Lexicon vader;  // source of lexicon-word samples and the VADER baseline
  Lexicon afinn;
  std::optional<AnnotatedCorpus> transfer;
  SplitSpec split;
};

struct ExperimentRow {
  ExperimentConfig config;
  ClassificationReport report;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

inline AnnotatedCorpus collapse_corpus(AnnotatedCorpus corpus) {
  for (auto& u : corpus) u.label = collapse_to_three(u.label);
  return corpus;
}

inline std::vector<SentimentLabel> report_labels(std::size_t categories) {
  if (categories == 3) return {SentimentLabel::Negative, SentimentLabel::Neutral, SentimentLabel::Positive};
  return {kAllLabels.begin(), kAllLabels.end()};
}

inline bool is_trainable(ModelKind k) { return k == ModelKind::RandomForest || k == ModelKind::NaiveBayes; }

inline ExperimentRow run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
  if (cfg.categories != 3 && cfg.categories != 5) throw ValidationError("categories must be 3 or 5");

  AnnotatedCorpus human;
  for (const auto& u : data.human)
    if (u.source == RecordSource::HumanAnnotated) human.push_back(u);

  AnnotatedCorpus train, test;
  switch (cfg.mode) {
    case EvalMode::HoldOut: {
      auto parts = split(human, data.split);
      train = std::move(parts.train);
      test = std::move(parts.test);
      break;
    }
    case EvalMode::NoSplit:
      train = human;
      test = human;
      break;
    case EvalMode::CrossCorpus:
      if (!data.transfer) throw Error("experiment '" + cfg.name + "' needs a transfer corpus");
      train = *data.transfer;
      test = human;
      break;
  }

  if (cfg.variant == TrainingVariant::HumanWithoutAmbiguous)
    std::erase_if(train, [](const auto& u) { return u.ambiguous; });
  if (cfg.variant == TrainingVariant::HumanPlusLexicon) {
    const auto samples = build_lexicon_samples(data.vader);
    train.insert(train.end(), samples.begin(), samples.end());
  }
  if (cfg.categories == 3) {
    train = collapse_corpus(std::move(train));
    test = collapse_corpus(std::move(test));
  }

  const Lexicon& lexicon = cfg.model.kind == ModelKind::Afinn ? data.afinn : data.vader;
  const auto model = train_model(train, cfg.model, lexicon);

  ExperimentRow row;
  row.config = cfg;
  row.train_size = is_trainable(cfg.model.kind) ? train.size() : 0;
  row.test_size = test.size();
  row.report = classification_report(predict_corpus(model, test, cfg.categories == 3),
                                     report_labels(cfg.categories));
  return row;
}

// Rows are independent; they run concurrently and come back in config order.
inline std::vector<ExperimentRow> run_experiment_matrix(const std::vector<ExperimentConfig>& configs,
                                                        const ExperimentData& data, bool parallel = true) {
  std::vector<ExperimentRow> rows;
  rows.reserve(configs.size());
  if (!parallel) {
    for (const auto& c : configs) rows.push_back(run_experiment(c, data));
    return rows;
  }
  std::vector<std::future<ExperimentRow>> jobs;
  for (const auto& c : configs) {
    auto cfg = c;
    cfg.model.forest.threads = 1;  // rows already fan out
    jobs.push_back(std::async(std::launch::async, [cfg, &data] { return run_experiment(cfg, data); }));
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    rows.push_back(jobs[i].get());
    rows.back().config = configs[i];
  }
  return rows;
}

inline std::string split_note(const SplitSpec& s) {
  const int train = static_cast<int>(std::lround(s.train_fraction * 100));
  return std::to_string(train) + "% training, " + std::to_string(100 - train) + "% testing";
}

// Model comparison, 3/5-class tree sweeps, the ambiguous-flag row and the
// lexicon-augmented row. A cross-corpus row is added when a transfer corpus
// is available.
inline std::vector<ExperimentConfig> default_experiment_matrix(std::uint64_t seed, const SplitSpec& split_spec,
                                                               bool with_transfer = false) {
  std::vector<ExperimentConfig> rows;
  const auto held_out = split_note(split_spec);
  auto forest = [&](std::size_t trees) {
    TrainSpec s;
    s.kind = ModelKind::RandomForest;
    s.n_trees = trees;
    s.seed = seed;
    return s;
  };
  for (std::size_t categories : {3u, 5u})
    for (std::size_t trees : {25u, 50u, 100u, 1000u, 2000u})
      rows.push_back({"forest-" + std::to_string(categories) + "c-" + std::to_string(trees) + "t", forest(trees),
                      categories, TrainingVariant::Human, EvalMode::HoldOut, held_out});
  rows.push_back({"forest-5c-25t-no-ambiguous", forest(25), 5, TrainingVariant::HumanWithoutAmbiguous,
                  EvalMode::HoldOut, held_out + " without ambiguous flag"});
  rows.push_back({"forest-5c-25t-lexicon", forest(25), 5, TrainingVariant::HumanPlusLexicon, EvalMode::HoldOut,
                  held_out + " + Vader dataset"});
  if (with_transfer)
    rows.push_back({"forest-3c-100t-transfer", forest(100), 3, TrainingVariant::Human, EvalMode::CrossCorpus,
                    "Trained on transfer corpus, tested on all human dataset"});

  TrainSpec nb;
  nb.kind = ModelKind::NaiveBayes;
  rows.push_back({"naive-bayes-5c", nb, 5, TrainingVariant::Human, EvalMode::HoldOut, held_out});
  rows.push_back({"naive-bayes-5c-all", nb, 5, TrainingVariant::Human, EvalMode::NoSplit,
                  "Tested on all human dataset"});
  for (auto kind : {ModelKind::Afinn, ModelKind::Vader}) {
    TrainSpec s;
    s.kind = kind;
    for (std::size_t categories : {3u, 5u})
      rows.push_back({std::string(to_string(kind)) + "-" + std::to_string(categories) + "c", s, categories,
                      TrainingVariant::Human, EvalMode::NoSplit, "Tested on all human dataset"});
  }
  return rows;
}

inline std::string format_matrix_table(const std::vector<ExperimentRow>& rows) {
  std::ostringstream s;
  s << std::right << std::setw(3) << "#" << "  " << std::left << std::setw(28) << "Experiment" << std::setw(15)
    << "Model" << std::right << std::setw(6) << "Cat." << std::setw(7) << "Trees" << std::setw(11)
    << "Precision" << std::setw(9) << "Recall" << std::setw(10) << "F-score" << std::setw(10) << "Accuracy"
    << "  " << std::left << "Dataset use" << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const bool forest = r.config.model.kind == ModelKind::RandomForest;
    s << std::right << std::setw(3) << (i + 1) << "  " << std::left << std::setw(28) << r.config.name
      << std::setw(15) << to_string(r.config.model.kind) << std::right << std::setw(6) << r.config.categories
      << std::setw(7) << (forest ? std::to_string(r.config.model.n_trees) : std::string("-")) << std::setw(11)
      << format_percent(r.report.weighted_precision) << std::setw(9) << format_percent(r.report.weighted_recall)
      << std::setw(10) << format_percent(r.report.weighted_f_score) << std::setw(10)
      << format_percent(r.report.accuracy) << "  " << std::left << r.config.note << '\n';
  }
  return s.str();
}

inline nlohmann::json to_json(const ExperimentRow& r, std::size_t index) {
  auto j = to_json(r.report);
  j["row"] = index;
  j["name"] = r.config.name;
  j["model"] = std::string(to_string(r.config.model.kind));
  j["categories"] = r.config.categories;
  if (r.config.model.kind == ModelKind::RandomForest) j["trees"] = r.config.model.n_trees;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j["note"] = r.config.note;
  return j;
}

inline std::string format_matrix_jsonl(const std::vector<ExperimentRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += to_json(rows[i], i + 1).dump();
    out += '\n';
  }
  return out;
}

}  // namespace bucketbot
