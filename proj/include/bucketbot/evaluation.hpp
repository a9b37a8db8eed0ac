#pragma once

// Train/test splitting, per-class classification reports and A/B survey
// aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bucketbot/corpus.hpp"
#include "bucketbot/detail/util.hpp"
#include "bucketbot/model.hpp"

namespace bucketbot {

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct TrainTestSplit {
  AnnotatedCorpus train;
  AnnotatedCorpus test;
};

// Lexicon-word records always go to train. Human records are split per
// class (stratified) or globally; both halves keep corpus order.
inline TrainTestSplit split(const AnnotatedCorpus& corpus, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ValidationError("train fraction must be in (0, 1)");

  std::vector<std::vector<std::size_t>> groups;
  std::vector<bool> to_train(corpus.size(), false);
  if (spec.stratified) {
    groups.resize(kNumLabels);
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus[i].source == RecordSource::HumanAnnotated) groups[index_of(corpus[i].label)].push_back(i);
    for (std::size_t k = 0; k < kNumLabels; ++k)
      if (groups[k].size() == 1)
        throw ValidationError("class " + std::string(to_name(label_from_index(k))) +
                              " has fewer than 2 records; cannot stratify");
  } else {
    groups.emplace_back();
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus[i].source == RecordSource::HumanAnnotated) groups[0].push_back(i);
  }

  detail::Rng rng(spec.seed);
  for (auto& group : groups) {
    if (group.empty()) continue;
    rng.shuffle(group);
    auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * group.size() + 0.5));
    if (group.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, group.size() - 1);
    for (std::size_t j = 0; j < n_train; ++j) to_train[group[j]] = true;
  }

  TrainTestSplit out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].source == RecordSource::LexiconWord || to_train[i])
      out.train.push_back(corpus[i]);
    else
      out.test.push_back(corpus[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct ClassMetrics {
  SentimentLabel label = SentimentLabel::Neutral;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  std::vector<ClassMetrics> classes;  // one row per reported label, scale order
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f_score = 0.0;
  double accuracy = 0.0;
  std::size_t total_support = 0;
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> confusion{};  // [gold][predicted]

  const ClassMetrics& metrics_for(SentimentLabel l) const {
    for (const auto& c : classes)
      if (c.label == l) return c;
    throw Error("label not in report");
  }
};

inline double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

using GoldPredicted = std::pair<SentimentLabel, SentimentLabel>;

// One-vs-rest precision/recall/F per label, support-weighted totals.
// `labels` chooses the rows (all five by default).
inline ClassificationReport classification_report(const std::vector<GoldPredicted>& predictions,
                                                  std::vector<SentimentLabel> labels = {
                                                      kAllLabels.begin(), kAllLabels.end()}) {
  if (predictions.empty()) throw ValidationError("no predictions to report on");
  ClassificationReport r;
  std::size_t correct = 0;
  for (const auto& [gold, pred] : predictions) {
    ++r.confusion[index_of(gold)][index_of(pred)];
    if (gold == pred) ++correct;
  }
  r.total_support = predictions.size();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());

  double weight = 0.0;
  for (auto label : labels) {
    const auto k = index_of(label);
    std::size_t tp = r.confusion[k][k], predicted = 0, support = 0;
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      predicted += r.confusion[j][k];
      support += r.confusion[k][j];
    }
    ClassMetrics m;
    m.label = label;
    m.support = support;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    m.f_score = f_measure(m.precision, m.recall);
    r.weighted_precision += static_cast<double>(support) * m.precision;
    r.weighted_recall += static_cast<double>(support) * m.recall;
    r.weighted_f_score += static_cast<double>(support) * m.f_score;
    weight += static_cast<double>(support);
    r.classes.push_back(m);
  }
  if (weight > 0.0) {
    r.weighted_precision /= weight;
    r.weighted_recall /= weight;
    r.weighted_f_score /= weight;
  }
  return r;
}

// Fraction of gold non-neutral records predicted with exactly the gold label.
inline double non_neutral_recall(const std::vector<GoldPredicted>& predictions) {
  std::size_t total = 0, hit = 0;
  for (const auto& [gold, pred] : predictions) {
    if (gold == SentimentLabel::Neutral) continue;
    ++total;
    if (gold == pred) ++hit;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

inline std::vector<GoldPredicted> predict_corpus(const Model& model, const AnnotatedCorpus& test,
                                                 bool three_class = false) {
  std::vector<GoldPredicted> out;
  out.reserve(test.size());
  for (const auto& u : test) {
    auto pred = model.classify(u.text);
    auto gold = u.label;
    if (three_class) {
      pred = collapse_to_three(pred);
      gold = collapse_to_three(gold);
    }
    out.emplace_back(gold, pred);
  }
  return out;
}

// Percent with half-up rounding, e.g. 0.31254 -> 31.3 at one decimal.
inline double round_percent(double fraction, int decimals = 1) {
  const double scale = std::pow(10.0, decimals);
  // The nudge keeps values like 0.315 (stored as 0.31499999...) rounding up.
  return std::floor(fraction * 100.0 * scale + 0.5 + 1e-9) / scale;
}

inline std::string format_percent(double fraction, int decimals = 1) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << round_percent(fraction, decimals) << '%';
  return s.str();
}

// Plain-text layout of the per-class report tables.
inline std::string format_report_table(const ClassificationReport& r, const std::string& title = {}) {
  std::ostringstream s;
  if (!title.empty()) s << title << '\n';
  s << std::left << std::setw(16) << "Annotation" << std::right << std::setw(11) << "Precision"
    << std::setw(9) << "Recall" << std::setw(10) << "F-score" << std::setw(9) << "Support" << '\n';
  auto row = [&](std::string_view name, double p, double rc, double f, std::size_t n) {
    s << std::left << std::setw(16) << name << std::right << std::setw(11) << format_percent(p)
      << std::setw(9) << format_percent(rc) << std::setw(10) << format_percent(f) << std::setw(9) << n
      << '\n';
  };
  for (const auto& c : r.classes) row(to_display(c.label), c.precision, c.recall, c.f_score, c.support);
  row("Total", r.weighted_precision, r.weighted_recall, r.weighted_f_score, r.total_support);
  s << "Accuracy: " << format_percent(r.accuracy) << '\n';
  return s.str();
}

inline nlohmann::json to_json(const ClassificationReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.weighted_precision;
  j["recall"] = r.weighted_recall;
  j["f_score"] = r.weighted_f_score;
  j["support"] = r.total_support;
  auto& classes = j["classes"] = nlohmann::json::array();
  for (const auto& c : r.classes)
    classes.push_back({{"label", std::string(to_name(c.label))},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f_score", c.f_score},
                       {"support", c.support}});
  return j;
}

// ---------------------------------------------------------------------------
// A/B survey aggregation. Susan is the vanilla arm, Rob the sentiment arm.

enum class Arm { Susan, Rob };

constexpr std::string_view to_string(Arm a) { return a == Arm::Susan ? "Susan" : "Rob"; }

inline std::optional<Arm> arm_from_string(std::string_view s) {
  if (s == "Susan" || s == "susan") return Arm::Susan;
  if (s == "Rob" || s == "rob") return Arm::Rob;
  return std::nullopt;
}

struct ArmSurvey {
  Arm arm = Arm::Susan;
  bool understood = false;
  int rating = 0;  // 0..5
};

struct ArmStats {
  double understood_fraction = 0.0;
  double mean_rating = 0.0;
  std::size_t n_users = 0;
};

struct AbSummary {
  ArmStats susan;
  ArmStats rob;
  // (mean_rob - mean_susan) / mean_susan; nullopt when Susan's mean is 0.
  std::optional<double> relative_rating_improvement;
};

inline void validate_rating(int rating) {
  if (rating < 0 || rating > 5)
    throw ValidationError("rating " + std::to_string(rating) + " outside 0..5");
}

inline AbSummary ab_summary(const std::vector<ArmSurvey>& sessions) {
  std::array<std::size_t, 2> n{}, understood{};
  std::array<long long, 2> rating_sum{};
  for (const auto& s : sessions) {
    validate_rating(s.rating);
    const auto a = static_cast<std::size_t>(s.arm);
    ++n[a];
    understood[a] += s.understood ? 1 : 0;
    rating_sum[a] += s.rating;
  }
  for (auto arm : {Arm::Susan, Arm::Rob})
    if (n[static_cast<std::size_t>(arm)] == 0)
      throw ValidationError("no survey records for arm " + std::string(to_string(arm)));

  auto stats = [&](Arm arm) {
    const auto a = static_cast<std::size_t>(arm);
    ArmStats st;
    st.n_users = n[a];
    st.understood_fraction = static_cast<double>(understood[a]) / static_cast<double>(n[a]);
    st.mean_rating = static_cast<double>(rating_sum[a]) / static_cast<double>(n[a]);
    return st;
  };
  AbSummary out;
  out.susan = stats(Arm::Susan);
  out.rob = stats(Arm::Rob);
  if (out.susan.mean_rating > 0.0)
    out.relative_rating_improvement = (out.rob.mean_rating - out.susan.mean_rating) / out.susan.mean_rating;
  return out;
}

// `arm<TAB>understood<TAB>rating` rows; understood is yes/no, true/false or 1/0.
inline std::vector<ArmSurvey> parse_survey_table(std::string_view content) {
  std::vector<ArmSurvey> out;
  std::size_t line_no = 0;
  for (auto line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty() || line.front() == '#') continue;
    const auto cols = detail::split(line, '\t');
    const auto where = " at line " + std::to_string(line_no);
    if (cols.size() != 3) throw Error("expected arm<TAB>understood<TAB>rating" + where);
    ArmSurvey s;
    const auto arm = arm_from_string(detail::trim(cols[0]));
    if (!arm) throw Error("unknown arm '" + std::string(cols[0]) + "'" + where);
    s.arm = *arm;
    const auto u = detail::to_lower(detail::trim(cols[1]));
    if (u == "yes" || u == "true" || u == "1")
      s.understood = true;
    else if (u != "no" && u != "false" && u != "0")
      throw Error("bad understood value '" + std::string(cols[1]) + "'" + where);
    const auto rating = detail::parse_int<int>(detail::trim(cols[2]));
    if (!rating) throw Error("bad rating" + where);
    validate_rating(*rating);
    s.rating = *rating;
    out.push_back(s);
  }
  return out;
}

inline nlohmann::json to_json(const AbSummary& s) {
  auto arm = [](const ArmStats& a) {
    return nlohmann::json{{"understood_fraction", a.understood_fraction},
                          {"mean_rating", a.mean_rating},
                          {"n_users", a.n_users}};
  };
  nlohmann::json j{{"Susan", arm(s.susan)}, {"Rob", arm(s.rob)}};
  j["relative_rating_improvement"] =
      s.relative_rating_improvement ? nlohmann::json(*s.relative_rating_improvement) : nlohmann::json();
  return j;
}

inline std::string format_ab_summary(const AbSummary& s) {
  std::ostringstream o;
  o << std::left << std::setw(8) << "Arm" << std::right << std::setw(7) << "Users" << std::setw(13)
    << "Understood" << std::setw(13) << "Mean rating" << '\n';
  for (auto [name, a] : {std::pair{"Susan", s.susan}, std::pair{"Rob", s.rob}})
    o << std::left << std::setw(8) << name << std::right << std::setw(7) << a.n_users << std::setw(13)
      << format_percent(a.understood_fraction) << std::setw(13) << std::fixed << std::setprecision(2)
      << a.mean_rating << '\n';
  o << "Relative rating improvement: "
    << (s.relative_rating_improvement ? format_percent(*s.relative_rating_improvement, 2) : "n/a") << '\n';
  return o.str();
}

}  // namespace bucketbot
