#pragma once

// Annotated corpora, valence lexicons and the lexicon-word sample builder.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "bucketbot/detail/util.hpp"
#include "bucketbot/sentiment_label.hpp"
#include "bucketbot/tokenizer.hpp"

namespace bucketbot {

enum class RecordSource { HumanAnnotated, LexiconWord };

constexpr std::string_view to_string(RecordSource s) {
  return s == RecordSource::HumanAnnotated ? "human" : "lexicon";
}

struct AnnotatedUtterance {
  std::string text;
  SentimentLabel label = SentimentLabel::Neutral;
  RecordSource source = RecordSource::HumanAnnotated;
  std::optional<std::string> annotator_id;
  // Set when annotators marked the utterance as ambiguous (JSONL only).
  bool ambiguous = false;

  friend bool operator==(const AnnotatedUtterance&, const AnnotatedUtterance&) = default;
};

using AnnotatedCorpus = std::vector<AnnotatedUtterance>;

enum class CorpusFormat { TSV, JSONL };

// Throws ValidationError when a record breaks the corpus invariants.
inline void validate(const AnnotatedUtterance& u) {
  if (detail::trim(u.text).empty()) throw ValidationError("utterance text is empty");
  if (u.source == RecordSource::LexiconWord && u.label == SentimentLabel::Neutral)
    throw ValidationError("lexicon-word sample '" + u.text + "' cannot be Neutral");
}

namespace detail {

inline Error line_error(std::size_t line_no, const std::string& what) {
  return Error(what + " at line " + std::to_string(line_no));
}

inline AnnotatedCorpus parse_tsv_corpus(const std::vector<std::string>& lines) {
  AnnotatedCorpus corpus;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = lines[i];
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3)
      throw line_error(line_no, "malformed record (expected text<TAB>label[<TAB>annotator])");
    const auto token = trim(cols[1]);
    const auto parsed = annotation_from_token(token);
    if (!parsed) throw line_error(line_no, "unknown label '" + std::string(token) + "'");
    if (!*parsed) continue;  // skipped by the annotator; not a training record
    AnnotatedUtterance u;
    u.text = std::string(trim(cols[0]));
    if (u.text.empty()) throw line_error(line_no, "empty utterance text");
    u.label = **parsed;
    if (cols.size() == 3 && !trim(cols[2]).empty()) u.annotator_id = std::string(trim(cols[2]));
    corpus.push_back(std::move(u));
  }
  return corpus;
}

inline AnnotatedCorpus parse_jsonl_corpus(const std::vector<std::string>& lines) {
  AnnotatedCorpus corpus;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      throw line_error(line_no, "malformed JSON record");
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("label") ||
        !j["label"].is_string())
      throw line_error(line_no, "malformed record (need string fields 'text' and 'label')");
    const std::string name = j["label"].get<std::string>();
    if (name == kSkipName) continue;
    const auto label = label_from_name(name);
    if (!label) throw line_error(line_no, "unknown label '" + name + "'");
    AnnotatedUtterance u;
    u.text = std::string(trim(j["text"].get<std::string>()));
    if (u.text.empty()) throw line_error(line_no, "empty utterance text");
    u.label = *label;
    if (j.contains("source")) {
      const auto src = j["source"].get<std::string>();
      if (src == "human")
        u.source = RecordSource::HumanAnnotated;
      else if (src == "lexicon")
        u.source = RecordSource::LexiconWord;
      else
        throw line_error(line_no, "unknown source '" + src + "'");
    }
    if (j.contains("annotator") && j["annotator"].is_string())
      u.annotator_id = j["annotator"].get<std::string>();
    if (j.contains("ambiguous")) u.ambiguous = j["ambiguous"].get<bool>();
    try {
      validate(u);
    } catch (const ValidationError& e) {
      throw line_error(line_no, e.what());
    }
    corpus.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace detail

// Records labelled "skip" are dropped: they never become training data.
inline AnnotatedCorpus parse_corpus(std::string_view content, CorpusFormat format) {
  std::vector<std::string> lines;
  for (auto line : detail::split(content, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return format == CorpusFormat::TSV ? detail::parse_tsv_corpus(lines)
                                     : detail::parse_jsonl_corpus(lines);
}

inline AnnotatedCorpus load_corpus(const std::string& path, CorpusFormat format) {
  return parse_corpus(detail::read_file(path), format);
}

inline CorpusFormat format_from_path(std::string_view path) {
  return path.ends_with(".jsonl") || path.ends_with(".json") ? CorpusFormat::JSONL
                                                               : CorpusFormat::TSV;
}

inline AnnotatedCorpus load_corpus(const std::string& path) {
  return load_corpus(path, format_from_path(path));
}

inline nlohmann::json to_json(const AnnotatedUtterance& u) {
  nlohmann::json j;
  j["text"] = u.text;
  j["label"] = std::string(to_name(u.label));
  j["source"] = std::string(to_string(u.source));
  if (u.annotator_id) j["annotator"] = *u.annotator_id;
  if (u.ambiguous) j["ambiguous"] = true;
  return j;
}

// TSV carries neither source nor the ambiguity flag; use JSONL for
// corpora that mix human and lexicon-derived records.
inline std::string serialize_corpus(const AnnotatedCorpus& corpus, CorpusFormat format) {
  std::string out;
  for (const auto& u : corpus) {
    if (format == CorpusFormat::TSV) {
      if (u.text.find_first_of("\t\n") != std::string::npos)
        throw ValidationError("utterance contains a tab or newline: '" + u.text + "'");
      out += u.text;
      out += '\t';
      out += to_token(u.label);
      if (u.annotator_id) {
        out += '\t';
        out += *u.annotator_id;
      }
    } else {
      out += to_json(u).dump();
    }
    out += '\n';
  }
  return out;
}

inline void save_corpus(const AnnotatedCorpus& corpus, const std::string& path,
                        CorpusFormat format) {
  detail::write_file(path, serialize_corpus(corpus, format));
}

// ---------------------------------------------------------------------------
// Valence lexicons

enum class LexiconKind {
  Vader,  // real valences in [-4, 4]
  Afinn,  // integer valences in [-5, 5]
};

struct LexiconEntry {
  std::string word;
  double valence = 0.0;

  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

using Lexicon = std::vector<LexiconEntry>;

constexpr double max_valence(LexiconKind kind) { return kind == LexiconKind::Vader ? 4.0 : 5.0; }

inline void validate(const LexiconEntry& e, LexiconKind kind) {
  if (e.word.empty()) throw ValidationError("lexicon word is empty");
  if (detail::to_lower(e.word) != e.word)
    throw ValidationError("lexicon word '" + e.word + "' is not lowercase");
  const double limit = max_valence(kind);
  if (!(e.valence >= -limit && e.valence <= limit))
    throw ValidationError("valence " + detail::format_double(e.valence) + " of '" + e.word +
                          "' outside [-" + detail::format_double(limit) + ", " +
                          detail::format_double(limit) + "]");
  if (kind == LexiconKind::Afinn && e.valence != std::round(e.valence))
    throw ValidationError("AFINN valence of '" + e.word + "' is not an integer");
}

// `word<TAB>valence` lines. Extra columns are ignored so the upstream
// VADER file (which carries rater statistics) loads unchanged.
inline Lexicon parse_lexicon(std::string_view content, LexiconKind kind) {
  Lexicon lexicon;
  std::size_t line_no = 0;
  for (auto line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty() || line.front() == '#') continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() < 2) throw detail::line_error(line_no, "malformed lexicon entry");
    const auto valence = detail::parse_double(cols[1]);
    if (!valence) throw detail::line_error(line_no, "bad valence '" + std::string(cols[1]) + "'");
    LexiconEntry e{std::string(detail::trim(cols[0])), *valence};
    try {
      validate(e, kind);
    } catch (const ValidationError& err) {
      throw detail::line_error(line_no, err.what());
    }
    lexicon.push_back(std::move(e));
  }
  return lexicon;
}

inline Lexicon load_lexicon(const std::string& path, LexiconKind kind) {
  return parse_lexicon(detail::read_file(path), kind);
}

inline std::string serialize_lexicon(const Lexicon& lexicon) {
  std::string out;
  for (const auto& e : lexicon) {
    out += e.word;
    out += '\t';
    out += detail::format_double(e.valence);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon-word samples

inline constexpr double kStrongValence = 2.5;

// Bins: [-4.0, -3.0) VeryNegative, [-3.0, -2.5] Negative, |v| < 2.5 excluded,
// [2.5, 3.0] Positive, (3.0, 4.0] VeryPositive.
inline std::optional<SentimentLabel> discretize_vader(double valence) {
  if (!(valence >= -4.0 && valence <= 4.0))
    throw ValidationError("valence " + detail::format_double(valence) + " outside [-4, 4]");
  const double magnitude = std::abs(valence);
  if (magnitude < kStrongValence) return std::nullopt;
  const bool strong = magnitude > 3.0;
  if (valence > 0) return strong ? SentimentLabel::VeryPositive : SentimentLabel::Positive;
  return strong ? SentimentLabel::VeryNegative : SentimentLabel::Negative;
}

inline AnnotatedCorpus build_lexicon_samples(const Lexicon& lexicon) {
  AnnotatedCorpus samples;
  for (const auto& entry : lexicon) {
    validate(entry, LexiconKind::Vader);
    if (auto label = discretize_vader(entry.valence)) {
      AnnotatedUtterance u;
      u.text = entry.word;
      u.label = *label;
      u.source = RecordSource::LexiconWord;
      samples.push_back(std::move(u));
    }
  }
  return samples;
}

// Annotation candidates: n_lexical utterances containing an opinion word
// plus n_random drawn from the rest. Deterministic for a given seed.
inline std::vector<std::string> sample_candidate_utterances(
    const std::vector<std::string>& pool, const std::unordered_set<std::string>& opinion_lexicon,
    std::size_t n_lexical, std::size_t n_random, std::uint64_t seed) {
  std::vector<std::string> unique;
  {
    std::set<std::string> seen;
    for (const auto& s : pool)
      if (seen.insert(s).second) unique.push_back(s);
  }
  std::vector<std::size_t> qualifying, rest;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    const auto tokens = tokenize(unique[i]);
    const bool has_opinion = std::any_of(tokens.begin(), tokens.end(), [&](const auto& t) {
      return opinion_lexicon.count(t) > 0;
    });
    (has_opinion ? qualifying : rest).push_back(i);
  }
  if (qualifying.size() < n_lexical)
    throw Error("not enough utterances with an opinion word: " + std::to_string(n_lexical) +
                " requested, " + std::to_string(qualifying.size()) + " available");

  detail::Rng rng(seed);
  rng.shuffle(qualifying);
  std::vector<std::size_t> chosen(qualifying.begin(), qualifying.begin() + n_lexical);
  // Unpicked opinion utterances stay eligible for the random part.
  rest.insert(rest.end(), qualifying.begin() + n_lexical, qualifying.end());
  std::sort(rest.begin(), rest.end());
  if (rest.size() < n_random)
    throw Error("not enough remaining utterances: " + std::to_string(n_random) + " requested, " +
                std::to_string(rest.size()) + " available");
  rng.shuffle(rest);
  chosen.insert(chosen.end(), rest.begin(), rest.begin() + n_random);

  std::vector<std::string> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(unique[i]);
  return out;
}

// Splits utterances into equal parts for n annotators; each annotator also
// receives the first `overlap_fraction` of the next annotator's part, which
// gives the paired slices used for agreement.
struct AnnotatorAssignment {
  std::string annotator;
  std::vector<std::string> unique;
  std::vector<std::string> overlap;  // shared with the next annotator
  std::string overlap_with;
};

inline std::vector<AnnotatorAssignment> split_for_annotators(std::vector<std::string> utterances,
                                                             std::size_t n_annotators,
                                                             double overlap_fraction,
                                                             std::uint64_t seed) {
  if (n_annotators < 2) throw ValidationError("need at least 2 annotators");
  if (!(overlap_fraction > 0.0 && overlap_fraction <= 1.0))
    throw ValidationError("overlap fraction must be in (0, 1]");
  if (utterances.size() < n_annotators) throw ValidationError("fewer utterances than annotators");
  detail::Rng rng(seed);
  rng.shuffle(utterances);
  const std::size_t part = utterances.size() / n_annotators;
  const auto n_overlap =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(overlap_fraction * part)));
  std::vector<AnnotatorAssignment> out(n_annotators);
  for (std::size_t a = 0; a < n_annotators; ++a) {
    out[a].annotator = "annotator" + std::to_string(a + 1);
    const auto begin = utterances.begin() + static_cast<std::ptrdiff_t>(a * part);
    // The last annotator absorbs the remainder.
    const auto end = a + 1 == n_annotators ? utterances.end()
                                           : begin + static_cast<std::ptrdiff_t>(part);
    out[a].unique.assign(begin, end);
  }
  for (std::size_t a = 0; a < n_annotators; ++a) {
    const auto& next = out[(a + 1) % n_annotators];
    out[a].overlap_with = next.annotator;
    out[a].overlap.assign(next.unique.begin(),
                          next.unique.begin() + static_cast<std::ptrdiff_t>(
                                                    std::min(n_overlap, next.unique.size())));
  }
  return out;
}

}  // namespace bucketbot
