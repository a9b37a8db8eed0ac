#pragma once

// Rule-table bots that stand in for the socialbot's response generators.
//
// Rule file: one `pattern<TAB>priority<TAB>response` per line, '#' comments.
// Patterns are case-insensitive substrings, `tok:` token sequences, or `*`.
// Response templates may use {text} (the user utterance), {rest} (what
// follows the match) and {last} (the previous user utterance).

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bucketbot/detail/util.hpp"
#include "bucketbot/orchestrator.hpp"
#include "bucketbot/tokenizer.hpp"

namespace bucketbot {

enum class BotKind { Persona, Facts, Jokes, News, Weather, Wiki, Fallback };

constexpr std::string_view to_string(BotKind k) {
  switch (k) {
    case BotKind::Persona:
      return "persona";
    case BotKind::Facts:
      return "facts";
    case BotKind::Jokes:
      return "jokes";
    case BotKind::News:
      return "news";
    case BotKind::Weather:
      return "weather";
    case BotKind::Wiki:
      return "wiki";
    case BotKind::Fallback:
      return "fallback";
  }
  return "";
}

inline std::optional<BotKind> bot_kind_from_string(std::string_view s) {
  const auto lower = detail::to_lower(s);
  for (auto k : {BotKind::Persona, BotKind::Facts, BotKind::Jokes, BotKind::News, BotKind::Weather, BotKind::Wiki,
                 BotKind::Fallback})
    if (to_string(k) == lower) return k;
  return std::nullopt;
}

struct BotRule {
  std::string pattern;
  int priority = 0;
  std::string response;
};

struct StubBot {
  std::string name;
  BotKind kind = BotKind::Fallback;
  std::vector<BotRule> rules;
};

namespace detail {

struct PatternMatch {
  std::string rest;
};

inline std::optional<PatternMatch> match_pattern(std::string_view pattern, std::string_view text,
                                                 const std::vector<std::string>& tokens) {
  if (pattern == "*") return PatternMatch{std::string(trim(text))};
  if (pattern.starts_with("tok:")) {
    const auto needle = tokenize(pattern.substr(4));
    if (needle.empty() || needle.size() > tokens.size()) return std::nullopt;
    for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i)
      if (std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        std::vector<std::string> rest(tokens.begin() + static_cast<std::ptrdiff_t>(i + needle.size()), tokens.end());
        return PatternMatch{join_tokens(rest)};
      }
    return std::nullopt;
  }
  const auto haystack = to_lower(text);
  const auto pos = haystack.find(to_lower(pattern));
  if (pos == std::string::npos) return std::nullopt;
  return PatternMatch{std::string(trim(text.substr(pos + pattern.size())))};
}

inline std::string fill_template(std::string_view tmpl, std::string_view text, std::string_view rest,
                                 std::string_view last) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    auto try_key = [&](std::string_view key, std::string_view value) {
      if (tmpl.substr(i).starts_with(key)) {
        out += value;
        i += key.size();
        return true;
      }
      return false;
    };
    if (try_key("{text}", trim(text)) || try_key("{rest}", rest) || try_key("{last}", last)) continue;
    out += tmpl[i++];
  }
  return out;
}

}  // namespace detail

// First matching rule wins. A Fallback bot always answers.
inline std::optional<BotResponse> respond(const StubBot& bot, std::string_view user_text,
                                          const std::vector<std::string>& recent_turns = {}) {
  const auto tokens = tokenize(user_text);
  const std::string_view last = recent_turns.empty() ? std::string_view{} : std::string_view(recent_turns.back());
  for (const auto& rule : bot.rules) {
    if (auto m = detail::match_pattern(rule.pattern, user_text, tokens)) {
      auto text = detail::fill_template(rule.response, user_text, m->rest, last);
      if (detail::trim(text).empty()) continue;
      return BotResponse{bot.name, std::move(text), rule.priority};
    }
  }
  if (bot.kind == BotKind::Fallback) return BotResponse{bot.name, "I see. Tell me more.", 0};
  return std::nullopt;
}

inline StubBot parse_bot(std::string name, std::string_view content, std::optional<BotKind> kind = std::nullopt) {
  StubBot bot;
  bot.name = std::move(name);
  std::size_t line_no = 0;
  for (auto line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty()) continue;
    if (line.starts_with("#kind")) {
      const auto cols = detail::split(line, '\t');
      if (cols.size() != 2 || !bot_kind_from_string(detail::trim(cols[1])))
        throw Error("bad #kind line in bot '" + bot.name + "' at line " + std::to_string(line_no));
      kind = bot_kind_from_string(detail::trim(cols[1]));
      continue;
    }
    if (line.front() == '#') continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3)
      throw Error("bot '" + bot.name + "': expected pattern<TAB>priority<TAB>response at line " +
                  std::to_string(line_no));
    const auto priority = detail::parse_int<int>(cols[1]);
    if (!priority) throw Error("bot '" + bot.name + "': bad priority at line " + std::to_string(line_no));
    if (detail::trim(cols[0]).empty() || detail::trim(cols[2]).empty())
      throw Error("bot '" + bot.name + "': empty pattern or response at line " + std::to_string(line_no));
    bot.rules.push_back({std::string(detail::trim(cols[0])), *priority, std::string(detail::trim(cols[2]))});
  }
  if (!kind) kind = bot_kind_from_string(bot.name);
  if (!kind) throw Error("bot '" + bot.name + "' has no #kind line and its name is not a bot kind");
  bot.kind = *kind;
  return bot;
}

class BotEnsemble {
 public:
  BotEnsemble() = default;
  explicit BotEnsemble(std::vector<StubBot> bots) : bots_(std::move(bots)) {
    if (std::none_of(bots_.begin(), bots_.end(), [](const auto& b) { return b.kind == BotKind::Fallback; }))
      throw ValidationError("bot ensemble needs a Fallback bot");
    for (std::size_t i = 0; i < bots_.size(); ++i)
      for (std::size_t j = i + 1; j < bots_.size(); ++j)
        if (bots_[i].name == bots_[j].name) throw ValidationError("duplicate bot name '" + bots_[i].name + "'");
  }

  const std::vector<StubBot>& bots() const { return bots_; }

  // Candidates in bot order; never empty.
  std::vector<BotResponse> respond_all(std::string_view user_text,
                                       const std::vector<std::string>& recent_turns = {}) const {
    std::vector<BotResponse> out;
    for (const auto& bot : bots_)
      if (auto r = respond(bot, user_text, recent_turns)) out.push_back(std::move(*r));
    return out;
  }

 private:
  std::vector<StubBot> bots_;
};

// Every `<name>.tsv` in the directory, in file-name order.
inline BotEnsemble load_bot_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("bot directory '" + dir + "' not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".tsv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<StubBot> bots;
  for (const auto& f : files) bots.push_back(parse_bot(f.stem().string(), detail::read_file(f.string())));
  return BotEnsemble(std::move(bots));
}

}  // namespace bucketbot
