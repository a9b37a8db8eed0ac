#pragma once

// The Bucket: classify the user turn, kick candidate responses of opposite
// polarity, pick a response and prepend a sentiment-matched prefix unless the
// response already carries that sentiment.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bucketbot/detail/util.hpp"
#include "bucketbot/model.hpp"
#include "bucketbot/sentiment_label.hpp"
#include "bucketbot/tokenizer.hpp"

namespace bucketbot {

struct BotResponse {
  std::string bot_name;
  std::string text;
  int priority = 0;  // higher wins

  friend bool operator==(const BotResponse&, const BotResponse&) = default;
};

enum class Target { System, Other, Unknown };

enum class PrefixSuppression {
  SameSentimentAlready,
  NeutralUser,
  BotGatingDisabled,
  SentimentDisabled,
  // Every candidate conflicted and the fallback still opposes the user.
  OppositeSentimentFallback,
};

constexpr std::string_view to_string(Target t) {
  switch (t) {
    case Target::System:
      return "System";
    case Target::Other:
      return "Other";
    case Target::Unknown:
      return "Unknown";
  }
  return "";
}

constexpr std::string_view to_string(PrefixSuppression r) {
  switch (r) {
    case PrefixSuppression::SameSentimentAlready:
      return "SameSentimentAlready";
    case PrefixSuppression::NeutralUser:
      return "NeutralUser";
    case PrefixSuppression::BotGatingDisabled:
      return "BotGatingDisabled";
    case PrefixSuppression::SentimentDisabled:
      return "SentimentDisabled";
    case PrefixSuppression::OppositeSentimentFallback:
      return "OppositeSentimentFallback";
  }
  return "";
}

using PrefixTable = std::map<SentimentLabel, std::vector<std::string>>;

struct GatingConfig {
  std::set<std::string> gating_disabled_bots{"weather", "news", "wiki"};
  std::set<std::string> negation_tokens{"not", "no", "never", "none", "neither", "nor"};
  // Sympathy-style prefixes, used unless the user addresses the system.
  PrefixTable prefix_table;
  // Self-acknowledgement variants for sentiment aimed at the system; falls
  // back to prefix_table for classes left empty.
  PrefixTable self_prefix_table;
  bool sentiment_enabled = true;
  bool flip_bot_responses = false;
  std::string system_name = "alana";
  std::set<std::string> second_person_tokens{"you", "your", "yours", "yourself", "you're", "you've",
                                             "you'll", "you'd", "u", "ur"};
  std::set<std::string> other_subject_tokens{"he",  "she",     "they",     "him",      "her",
                                             "them", "his",    "hers",     "their",    "theirs",
                                             "my",  "someone", "somebody", "everyone", "people"};
  std::uint64_t seed = 0;

  void validate() const {
    for (auto label : kAllLabels) {
      const auto it = prefix_table.find(label);
      const bool has = it != prefix_table.end() && !it->second.empty();
      if (label == SentimentLabel::Neutral && has) throw ValidationError("Neutral must not have prefixes");
      if (label != SentimentLabel::Neutral && !has)
        throw ValidationError("prefix table has no phrases for " + std::string(to_name(label)));
    }
    if (auto it = self_prefix_table.find(SentimentLabel::Neutral);
        it != self_prefix_table.end() && !it->second.empty())
      throw ValidationError("Neutral must not have self prefixes");
  }

  // All prefix phrases of both tables.
  std::vector<std::string> all_prefixes() const {
    std::vector<std::string> out;
    for (const auto* table : {&prefix_table, &self_prefix_table})
      for (const auto& [label, phrases] : *table) out.insert(out.end(), phrases.begin(), phrases.end());
    return out;
  }
};

inline PrefixTable default_prefix_table() {
  return {
      {SentimentLabel::VeryNegative,
       {"I'm really sorry to hear that.", "Oh no, that sounds really hard.", "I'm so sorry about that."}},
      {SentimentLabel::Negative,
       {"I'm sorry to hear that.", "That sounds a bit rough.", "Oh, that's a shame."}},
      {SentimentLabel::Positive, {"That's nice!", "Good to hear!", "Glad to hear that!"}},
      {SentimentLabel::VeryPositive, {"That's wonderful!", "Wow, that's amazing!", "That's fantastic news!"}},
  };
}

inline PrefixTable default_self_prefix_table() {
  return {
      {SentimentLabel::VeryNegative, {"I'm really sorry I let you down.", "I apologise, I'll try to do better."}},
      {SentimentLabel::Negative, {"Sorry about that.", "I'm sorry, I'll try harder."}},
      {SentimentLabel::Positive, {"Thank you!", "That's kind of you!"}},
      {SentimentLabel::VeryPositive, {"Thank you so much!", "Wow, thank you, that's lovely!"}},
  };
}

inline GatingConfig default_gating_config() {
  GatingConfig c;
  c.prefix_table = default_prefix_table();
  c.self_prefix_table = default_self_prefix_table();
  return c;
}

namespace detail {

inline std::set<std::string> parse_word_set(std::string_view value) {
  std::set<std::string> out;
  for (auto item : split(value, ','))
    if (auto w = trim(item); !w.empty()) out.insert(to_lower(w));
  return out;
}

inline bool parse_bool(std::string_view v, std::size_t line_no) {
  const auto s = to_lower(trim(v));
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw Error("bad boolean '" + std::string(v) + "' at line " + std::to_string(line_no));
}

}  // namespace detail

// `key = value` lines, '#' comments. Prefix phrases use repeated
// `prefix.<Label> = phrase` / `self_prefix.<Label> = phrase` keys. Keys not
// present keep their defaults; giving any phrase for a table replaces that
// table's defaults.
inline GatingConfig parse_gating_config(std::string_view content) {
  GatingConfig c = default_gating_config();
  bool prefix_seen = false, self_prefix_seen = false;
  std::size_t line_no = 0;
  for (auto line : detail::split(content, '\n')) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error("expected key = value at line " + std::to_string(line_no));
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));

    if (key == "sentiment_enabled") {
      c.sentiment_enabled = detail::parse_bool(value, line_no);
    } else if (key == "flip_bot_responses") {
      c.flip_bot_responses = detail::parse_bool(value, line_no);
    } else if (key == "gating_disabled_bots") {
      c.gating_disabled_bots = detail::parse_word_set(value);
    } else if (key == "negation_tokens") {
      c.negation_tokens = detail::parse_word_set(value);
    } else if (key == "second_person_tokens") {
      c.second_person_tokens = detail::parse_word_set(value);
    } else if (key == "other_subject_tokens") {
      c.other_subject_tokens = detail::parse_word_set(value);
    } else if (key == "system_name") {
      c.system_name = detail::to_lower(value);
    } else if (key == "seed") {
      const auto seed = detail::parse_int<std::uint64_t>(value);
      if (!seed) throw Error("bad seed at line " + std::to_string(line_no));
      c.seed = *seed;
    } else if (key.starts_with("prefix.") || key.starts_with("self_prefix.")) {
      const bool self = key.starts_with("self_prefix.");
      const auto label_name = std::string_view(key).substr(key.find('.') + 1);
      const auto label = label_from_name(label_name);
      if (!label) throw Error("unknown label '" + std::string(label_name) + "' at line " + std::to_string(line_no));
      if (value.empty()) throw Error("empty prefix phrase at line " + std::to_string(line_no));
      auto& table = self ? c.self_prefix_table : c.prefix_table;
      bool& seen = self ? self_prefix_seen : prefix_seen;
      if (!seen) {
        table.clear();
        seen = true;
      }
      table[*label].emplace_back(value);
    } else {
      throw Error("unknown key '" + key + "' at line " + std::to_string(line_no));
    }
  }
  c.validate();
  return c;
}

inline GatingConfig load_gating_config(const std::string& path) {
  return parse_gating_config(detail::read_file(path));
}

inline std::string serialize_gating_config(const GatingConfig& c) {
  auto join = [](const std::set<std::string>& s) {
    std::string out;
    for (const auto& w : s) out += (out.empty() ? "" : ", ") + w;
    return out;
  };
  std::string out;
  out += "sentiment_enabled = " + std::string(c.sentiment_enabled ? "true" : "false") + "\n";
  out += "flip_bot_responses = " + std::string(c.flip_bot_responses ? "true" : "false") + "\n";
  out += "system_name = " + c.system_name + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "gating_disabled_bots = " + join(c.gating_disabled_bots) + "\n";
  out += "negation_tokens = " + join(c.negation_tokens) + "\n";
  out += "second_person_tokens = " + join(c.second_person_tokens) + "\n";
  out += "other_subject_tokens = " + join(c.other_subject_tokens) + "\n";
  for (const auto& [name, table] : {std::pair{"prefix", &c.prefix_table}, std::pair{"self_prefix", &c.self_prefix_table}})
    for (const auto& [label, phrases] : *table)
      for (const auto& p : phrases) out += std::string(name) + "." + std::string(to_name(label)) + " = " + p + "\n";
  return out;
}

// ---------------------------------------------------------------------------

inline bool has_negation(const std::vector<std::string>& tokens, const GatingConfig& config) {
  return std::any_of(tokens.begin(), tokens.end(), [&](const auto& t) { return config.negation_tokens.count(t) > 0; });
}

// Mirrors the label when the utterance contains a negation token.
inline SentimentLabel detect_negation_flip(const std::vector<std::string>& tokens, SentimentLabel label,
                                           const GatingConfig& config) {
  return has_negation(tokens, config) ? mirror(label) : label;
}

inline SentimentLabel detect_negation_flip(std::string_view text, SentimentLabel label, const GatingConfig& config) {
  return detect_negation_flip(tokenize(text), label, config);
}

// Second-person words or the system's name: the user talks about the system.
// Third-party subjects: about someone or something else.
inline Target detect_target(const std::vector<std::string>& tokens, const GatingConfig& config) {
  bool other = false;
  for (const auto& t : tokens) {
    if (config.second_person_tokens.count(t) || t == config.system_name) return Target::System;
    if (config.other_subject_tokens.count(t)) other = true;
  }
  return other ? Target::Other : Target::Unknown;
}

inline Target detect_target(std::string_view text, const GatingConfig& config) {
  return detect_target(tokenize(text), config);
}

struct CandidateDecision {
  BotResponse response;
  std::optional<SentimentLabel> label;  // nullopt when not classified
  bool gating_disabled = false;
  bool kicked = false;
};

struct BucketDecision {
  SentimentLabel user_label_raw = SentimentLabel::Neutral;
  SentimentLabel user_label = SentimentLabel::Neutral;  // after negation flip
  bool negation_flipped = false;
  Target target = Target::Unknown;
  std::vector<CandidateDecision> candidates;
  std::size_t selected_index = 0;
  bool fallback = false;  // every classified candidate was kicked
  std::optional<std::string> prefix;
  std::optional<SentimentLabel> prefix_class;
  std::optional<PrefixSuppression> prefix_suppressed_reason;

  const BotResponse& selected() const { return candidates.at(selected_index).response; }
  const CandidateDecision& selected_candidate() const { return candidates.at(selected_index); }

  std::vector<std::string> kicked_bots() const {
    std::vector<std::string> out;
    for (const auto& c : candidates)
      if (c.kicked) out.push_back(c.response.bot_name);
    return out;
  }
};

// Identifies the turn so the prefix choice is reproducible per session.
struct TurnKey {
  std::string session_id;
  std::uint64_t turn_index = 0;
};

namespace detail {

inline const std::vector<std::string>& phrases_for(const GatingConfig& config, SentimentLabel label, Target target) {
  if (target == Target::System)
    if (auto it = config.self_prefix_table.find(label); it != config.self_prefix_table.end() && !it->second.empty())
      return it->second;
  const auto it = config.prefix_table.find(label);
  if (it == config.prefix_table.end() || it->second.empty())
    throw ValidationError("prefix table has no phrases for " + std::string(to_name(label)));
  return it->second;
}

inline std::size_t prefix_choice(const GatingConfig& config, const TurnKey& turn, std::size_t n) {
  std::uint64_t h = fnv1a(turn.session_id, splitmix64(config.seed));
  h = splitmix64(h ^ splitmix64(turn.turn_index));
  return static_cast<std::size_t>(h % n);
}

}  // namespace detail

// `classify` maps a text to a SentimentLabel (a Model, or any callable).
// Steps: (1) user label with negation flip; (2) classify candidates from
// non-disabled bots and kick those of opposite nonzero polarity; (3) pick
// the highest-priority survivor, else the least conflicting candidate;
// (4) prefix with a phrase of the user's class unless suppressed.
template <typename Classifier>
BucketDecision gate_and_select(std::string_view user_text, const std::vector<BotResponse>& candidates,
                               const Classifier& classify, const GatingConfig& config, const TurnKey& turn = {}) {
  if (candidates.empty()) throw ValidationError("no candidate responses");

  BucketDecision d;
  const auto tokens = tokenize(user_text);
  d.user_label_raw = classify(user_text);
  d.user_label = detect_negation_flip(tokens, d.user_label_raw, config);
  d.negation_flipped = d.user_label != d.user_label_raw;
  d.target = detect_target(tokens, config);
  const int user_sign = polarity_sign(d.user_label);

  d.candidates.reserve(candidates.size());
  for (const auto& c : candidates) {
    CandidateDecision cd;
    cd.response = c;
    cd.gating_disabled = config.gating_disabled_bots.count(c.bot_name) > 0;
    if (config.sentiment_enabled && !cd.gating_disabled) {
      auto label = classify(c.text);
      if (config.flip_bot_responses) label = detect_negation_flip(c.text, label, config);
      cd.label = label;
      const int sign = polarity_sign(label);
      cd.kicked = user_sign != 0 && sign != 0 && sign == -user_sign;
    }
    d.candidates.push_back(std::move(cd));
  }

  // Highest priority wins; earlier candidates win ties.
  auto better = [&](std::size_t a, std::size_t b) {
    return d.candidates[a].response.priority > d.candidates[b].response.priority;
  };
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < d.candidates.size(); ++i)
    if (!d.candidates[i].kicked && (!pick || better(i, *pick))) pick = i;
  // Disabled-bot candidates are never kicked, so reaching here means every
  // candidate was classified and kicked.
  if (!pick) {
    d.fallback = true;
    for (std::size_t i = 0; i < d.candidates.size(); ++i) {
      if (!pick) {
        pick = i;
        continue;
      }
      const int di = class_distance(*d.candidates[i].label, d.user_label);
      const int dp = class_distance(*d.candidates[*pick].label, d.user_label);
      if (di < dp || (di == dp && better(i, *pick))) pick = i;
    }
    // The fallback was kicked; un-kick it so kicked and selected stay disjoint.
    d.candidates[*pick].kicked = false;
  }
  d.selected_index = *pick;

  const auto& chosen = d.candidates[d.selected_index];
  if (!config.sentiment_enabled) {
    d.prefix_suppressed_reason = PrefixSuppression::SentimentDisabled;
  } else if (user_sign == 0) {
    d.prefix_suppressed_reason = PrefixSuppression::NeutralUser;
  } else if (chosen.gating_disabled) {
    d.prefix_suppressed_reason = PrefixSuppression::BotGatingDisabled;
  } else if (polarity_sign(*chosen.label) == user_sign) {
    d.prefix_suppressed_reason = PrefixSuppression::SameSentimentAlready;
  } else if (polarity_sign(*chosen.label) == -user_sign) {
    d.prefix_suppressed_reason = PrefixSuppression::OppositeSentimentFallback;
  } else {
    const auto& phrases = detail::phrases_for(config, d.user_label, d.target);
    d.prefix = phrases[detail::prefix_choice(config, turn, phrases.size())];
    d.prefix_class = d.user_label;
  }
  return d;
}

inline BucketDecision gate_and_select(std::string_view user_text, const std::vector<BotResponse>& candidates,
                                      const Model& model, const GatingConfig& config, const TurnKey& turn = {}) {
  return gate_and_select(
      user_text, candidates, [&](std::string_view t) { return model.classify(t); }, config, turn);
}

// Prefix, one space, selected response.
inline std::string render_final(const BucketDecision& d) {
  if (!d.prefix) return d.selected().text;
  return *d.prefix + " " + d.selected().text;
}

inline nlohmann::json to_json(const BucketDecision& d) {
  nlohmann::json j;
  j["user_label_raw"] = std::string(to_name(d.user_label_raw));
  j["user_label"] = std::string(to_name(d.user_label));
  j["negation_flipped"] = d.negation_flipped;
  j["target"] = std::string(to_string(d.target));
  auto& cands = j["candidates"] = nlohmann::json::array();
  for (const auto& c : d.candidates) {
    nlohmann::json cj{{"bot", c.response.bot_name},
                      {"text", c.response.text},
                      {"priority", c.response.priority},
                      {"gating_disabled", c.gating_disabled},
                      {"kicked", c.kicked}};
    cj["label"] = c.label ? nlohmann::json(std::string(to_name(*c.label))) : nlohmann::json();
    cands.push_back(std::move(cj));
  }
  j["kicked"] = d.kicked_bots();
  j["selected"] = d.selected().bot_name;
  j["selected_index"] = d.selected_index;
  j["fallback"] = d.fallback;
  j["prefix"] = d.prefix ? nlohmann::json(*d.prefix) : nlohmann::json();
  j["prefix_class"] = d.prefix_class ? nlohmann::json(std::string(to_name(*d.prefix_class))) : nlohmann::json();
  j["prefix_suppressed_reason"] =
      d.prefix_suppressed_reason ? nlohmann::json(std::string(to_string(*d.prefix_suppressed_reason))) : nlohmann::json();
  return j;
}

}  // namespace bucketbot
