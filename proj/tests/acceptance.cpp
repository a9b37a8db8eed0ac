// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "bucketbot/experiment.hpp"
#include "bucketbot/lexicon_scorer.hpp"
#include "bucketbot/orchestrator.hpp"
#include "bucketbot/synthetic.hpp"
#include "support.hpp"

using namespace bucketbot;
using testing_support::fixture;

namespace {

// Thrown by a check to fail with a message.
struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

std::string fmt(double v, int decimals = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<std::string()>& check) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = check();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && elapsed > limit_seconds) {
    ok = false;
    detail += "; took longer than " + fmt(limit_seconds, 0) + "s";
  }
  if (!ok) ++failures;
  std::cout << (ok ? "PASS " : "FAIL ") << name << " (" << detail << ", " << fmt(elapsed, 2) << "s)" << std::endl;
}

// ---------------------------------------------------------------------------

std::string metrics_arithmetic() {
  const auto preds = testing_support::negative_rows_predictions();
  const auto r = classification_report(preds);
  const auto oracle = testing_support::oracle_report(preds);
  for (const auto& c : r.classes) {
    const auto& o = oracle.prf.at(c.label);
    require(std::abs(c.precision - o[0]) < 1e-12 && std::abs(c.recall - o[1]) < 1e-12 &&
                std::abs(c.f_score - o[2]) < 1e-12 && c.support == oracle.support.at(c.label),
            "per-class metrics differ from the confusion-matrix oracle for " + std::string(to_name(c.label)));
  }
  require(std::abs(r.weighted_f_score - oracle.weighted_f) < 1e-12, "weighted F differs from oracle");
  require(std::abs(r.accuracy - oracle.accuracy) < 1e-12, "accuracy differs from oracle");
  const auto& neg = r.classes[index_of(SentimentLabel::Negative)];
  const auto& vneg = r.classes[index_of(SentimentLabel::VeryNegative)];
  require(std::abs(neg.precision - 0.5) < 1e-12 && std::abs(neg.recall - 5.0 / 22) < 1e-12, "Negative P/R");
  require(round_percent(neg.f_score, 0) == 31.0, "Negative F " + format_percent(neg.f_score) + " != 31%");
  require(round_percent(vneg.f_score, 0) == 40.0, "Very negative F " + format_percent(vneg.f_score) + " != 40%");
  return "Negative F " + format_percent(neg.f_score) + ", Very negative F " + format_percent(vneg.f_score);
}

std::string ab_arithmetic() {
  const auto s = ab_summary(parse_survey_table(detail::read_file(fixture("surveys.tsv"))));
  require(std::abs(s.susan.mean_rating - 2.34) < 1e-12 && std::abs(s.rob.mean_rating - 2.84) < 1e-12,
          "means " + fmt(s.susan.mean_rating) + " / " + fmt(s.rob.mean_rating));
  require(s.relative_rating_improvement.has_value(), "no improvement value");
  const double pct = *s.relative_rating_improvement * 100;
  require(std::abs(pct - 21.37) <= 0.01, "improvement " + fmt(pct) + "%");
  return "improvement " + fmt(pct, 2) + "% (tolerance 0.01)";
}

std::string kappa_oracle() {
  std::mt19937_64 rng(20240601);
  std::size_t compared = 0, degenerate = 0;
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    const auto o = testing_support::random_overlap(rng);
    for (auto mode : {SkipMode::StrictSkips, SkipMode::IgnoreSkips}) {
      const double expected = testing_support::oracle_kappa(o, mode);
      double got;
      try {
        got = cohen_kappa(o, mode);
      } catch (const Error&) {
        require(!std::isfinite(expected), "library refused a case the oracle defines");
        ++degenerate;
        continue;
      }
      if (std::isfinite(expected)) {
        worst = std::max(worst, std::abs(got - expected));
        ++compared;
      } else {
        require(got == 1.0, "undefined oracle value but library gave " + fmt(got));
      }
    }
  }
  require(worst <= 1e-9, "max deviation " + std::to_string(worst));
  require(compared > 900, "only " + std::to_string(compared) + " comparable cases");
  using L = SentimentLabel;
  auto pair = [](L a, L b) {
    AnnotationPair p;
    p.first = a;
    p.second = b;
    return p;
  };
  const AnnotationOverlap perfect{pair(L::Positive, L::Positive), pair(L::Negative, L::Negative),
                                  pair(L::Neutral, L::Neutral)};
  const AnnotationOverlap chance{pair(L::Positive, L::Positive), pair(L::Negative, L::Negative),
                                 pair(L::Positive, L::Negative), pair(L::Negative, L::Positive)};
  for (auto mode : {SkipMode::StrictSkips, SkipMode::IgnoreSkips}) {
    require(cohen_kappa(perfect, mode) == 1.0, "perfect agreement is not exactly 1");
    require(cohen_kappa(chance, mode) == 0.0, "chance agreement is not exactly 0");
  }
  return std::to_string(compared) + " cases within 1e-9, " + std::to_string(degenerate) + " degenerate rejected";
}

std::string discretization() {
  const auto lex = load_lexicon(fixture("vader.tsv"), LexiconKind::Vader);
  const auto samples = build_lexicon_samples(lex);
  std::map<std::string, double> valence;
  for (const auto& e : lex) valence[e.word] = e.valence;
  std::size_t strong = 0;
  for (const auto& e : lex) strong += std::abs(e.valence) >= 2.5;
  require(samples.size() == strong, "sample count " + std::to_string(samples.size()) + " != " + std::to_string(strong));
  for (const auto& s : samples) {
    const double v = valence.at(s.text);
    require(std::abs(v) >= 2.5, "weak word kept: " + s.text);
    require(s.label == *discretize_vader(v), "wrong label for " + s.text);
  }
  using L = SentimentLabel;
  require(discretize_vader(2.5) == L::Positive && discretize_vader(3.0) == L::Positive &&
              discretize_vader(3.01) == L::VeryPositive && discretize_vader(-2.5) == L::Negative &&
              discretize_vader(-3.0) == L::Negative && discretize_vader(-3.01) == L::VeryNegative &&
              !discretize_vader(2.49) && !discretize_vader(-2.49),
          "boundary values");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    const auto a = discretize_vader(v), b = discretize_vader(-v);
    require(a.has_value() == b.has_value() && (!a || *b == mirror(*a)), "asymmetric at " + fmt(v, 6));
  }
  return std::to_string(samples.size()) + " strong words, boundaries and 1000 symmetry cases";
}

std::string forest_sanity() {
  SignalCorpusOptions opts;
  opts.records = 1500;
  opts.seed = 11;
  const auto parts = split(generate_signal_corpus(opts), SplitSpec{0.7, 3, true});
  TrainSpec spec;
  spec.n_trees = 25;
  spec.seed = 9;
  const auto a = train_model(parts.train, spec);
  const double acc = classification_report(predict_corpus(a, parts.test)).accuracy;
  require(acc >= 0.9, "accuracy " + format_percent(acc) + " < 90%");
  require(save_model(a) == save_model(train_model(parts.train, spec)), "same seed gave different artifacts");
  return "held-out accuracy " + format_percent(acc) + " (>= 90%), artifacts identical";
}

std::string combined_training() {
  const auto human = load_corpus(fixture("demo.tsv"));
  const auto lex = load_lexicon(fixture("vader.tsv"), LexiconKind::Vader);
  std::set<std::string> seen;
  for (const auto& u : human)
    for (auto& t : tokenize(u.text)) seen.insert(t);

  // Unseen strong lexicon words in neutral carrier sentences.
  const std::vector<std::string> templates{"{} ", "it was {}", "that is {}", "so {} honestly"};
  AnnotatedCorpus test;
  for (const auto& s : build_lexicon_samples(lex)) {
    if (seen.count(s.text) || tokenize(s.text).size() != 1) continue;
    for (const auto& t : templates) {
      AnnotatedUtterance u;
      u.text = std::string(detail::trim(t.substr(0, t.find("{}")) + s.text + t.substr(t.find("{}") + 2)));
      u.label = s.label;
      test.push_back(std::move(u));
    }
  }
  require(test.size() >= 100, "too few unseen strong words");

  TrainSpec spec;
  spec.n_trees = 25;
  spec.seed = 7;
  auto combined = human;
  const auto samples = build_lexicon_samples(lex);
  combined.insert(combined.end(), samples.begin(), samples.end());
  const double base = non_neutral_recall(predict_corpus(train_model(human, spec), test));
  const double with = non_neutral_recall(predict_corpus(train_model(combined, spec), test));
  require(with > base, "recall " + format_percent(with) + " is not above " + format_percent(base));
  return "non-neutral recall " + format_percent(base) + " -> " + format_percent(with) + " on " +
         std::to_string(test.size()) + " sentences";
}

std::string afinn_oracle() {
  const auto lex = load_lexicon(fixture("afinn.tsv"), LexiconKind::Afinn);
  std::map<std::string, long> valence;
  std::vector<std::string> words;
  for (const auto& e : lex) {
    valence.emplace(e.word, static_cast<long>(e.valence));
    if (tokenize(e.word).size() == 1) words.push_back(e.word);
  }
  for (int i = 0; i < 200; ++i) words.push_back("filler" + std::to_string(i));
  std::mt19937_64 rng(17);
  const LexiconIndex index(lex);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto len = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<std::string> tokens;
    long sum = 0;
    for (int j = 0; j < len; ++j) {
      tokens.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)]);
      if (auto it = valence.find(tokens.back()); it != valence.end()) sum += it->second;
    }
    worst = std::max(worst, std::abs(afinn_score(tokens, index) - static_cast<double>(sum) / len));
  }
  require(worst <= 1e-12, "max deviation " + std::to_string(worst));
  return "1000 sentences within 1e-12";
}

// Structural properties every decision must satisfy.
void check_decision(const BucketDecision& d, const GatingConfig& cfg, const std::string& text) {
  const auto where = " for '" + text + "'";
  require(d.selected_index < d.candidates.size(), "selection out of range" + where);
  const auto& chosen = d.selected_candidate();
  require(!chosen.kicked, "selected a kicked candidate" + where);
  require(d.user_label == detect_negation_flip(text, d.user_label_raw, cfg), "negation flip mismatch" + where);
  const int sign = polarity_sign(d.user_label);
  bool all_kicked = true;
  int best_survivor = std::numeric_limits<int>::min();
  for (std::size_t i = 0; i < d.candidates.size(); ++i) {
    const auto& c = d.candidates[i];
    const bool disabled = cfg.gating_disabled_bots.count(c.response.bot_name) > 0;
    require(c.gating_disabled == disabled, "gating flag" + where);
    if (disabled || !cfg.sentiment_enabled) {
      require(!c.label && !c.kicked, "unclassified candidate has a label or kick" + where);
    } else {
      require(c.label.has_value(), "enabled candidate not classified" + where);
      const bool opposite = sign != 0 && polarity_sign(*c.label) == -sign;
      if (i != d.selected_index) require(c.kicked == opposite, "kick does not match polarity" + where);
    }
    if (!c.kicked && i != d.selected_index) best_survivor = std::max(best_survivor, c.response.priority);
    if (i != d.selected_index) all_kicked = all_kicked && c.kicked;
  }
  if (d.fallback) {
    require(all_kicked, "fallback with a surviving candidate" + where);
  } else {
    require(chosen.response.priority >= best_survivor, "a higher-priority survivor was passed over" + where);
    if (chosen.label) require(!(sign != 0 && polarity_sign(*chosen.label) == -sign), "opposite selected" + where);
  }
  require(d.prefix.has_value() != d.prefix_suppressed_reason.has_value(), "prefix and suppression both or neither" + where);
  if (!cfg.sentiment_enabled) require(!d.prefix, "prefix with sentiment disabled" + where);
  if (sign == 0) require(!d.prefix, "prefix for a neutral user" + where);
  if (chosen.gating_disabled) require(!d.prefix, "prefix on a gating-disabled bot" + where);
  if (d.prefix) {
    const auto& phrases = detail::phrases_for(cfg, d.user_label, d.target);
    require(std::find(phrases.begin(), phrases.end(), *d.prefix) != phrases.end(), "prefix from wrong class" + where);
    require(d.prefix_class == d.user_label, "prefix class" + where);
    require(chosen.label && polarity_sign(*chosen.label) == 0, "prefix on a polar response" + where);
    require(render_final(d) == *d.prefix + " " + chosen.response.text, "rendering" + where);
  } else {
    require(render_final(d) == chosen.response.text, "rendering" + where);
  }
}

std::string orchestrator_invariants() {
  const auto pipeline = testing_support::fixture_pipeline();
  const auto& model = *pipeline.model;
  auto rob = pipeline.gating;
  rob.sentiment_enabled = true;
  auto susan = pipeline.gating;
  susan.sentiment_enabled = false;

  // Named cases first.
  const auto neg = gate_and_select("i am not happy", pipeline.bots.respond_all("i am not happy"), model, rob);
  require(neg.negation_flipped && polarity_sign(neg.user_label) < 0, "'i am not happy' not flipped to negative");
  const auto news_text = "news about death note";
  const auto news = gate_and_select(news_text, pipeline.bots.respond_all(news_text), model, rob);
  require(news.selected().bot_name == "news" && !news.selected_candidate().label,
          "'news about death note' not answered by the unclassified news bot");
  require(!news.prefix, "'news about death note' got a prefix");

  const std::vector<std::string> vocab{
      "i",     "am",    "you",    "my",      "dog",   "died",  "sad",     "happy", "love",    "hate",
      "not",   "never", "joke",   "funny",   "fact",  "space", "news",    "about", "weather", "in",
      "tell",  "me",    "what",   "is",      "who",   "great", "awful",   "today", "so",      "this",
      "alana", "they",  "movie",  "terrible", "nice", "bad",   "raining", "how",   "are",     "your",
      "name",  "death", "note",   "boring",  "fun",   "good",  "horrible", "wonderful", "no", "headlines"};
  std::mt19937_64 rng(99);
  std::map<std::string, std::size_t> reasons;
  std::size_t prefixed = 0, kicks = 0, fallbacks = 0;
  for (int turn = 0; turn < 10000; ++turn) {
    const auto len = std::uniform_int_distribution<int>(1, 7)(rng);
    std::string text;
    for (int j = 0; j < len; ++j)
      text += (j ? " " : "") + vocab[std::uniform_int_distribution<std::size_t>(0, vocab.size() - 1)(rng)];
    const auto candidates = pipeline.bots.respond_all(text);
    const TurnKey key{"session" + std::to_string(turn % 37), static_cast<std::uint64_t>(turn)};
    const auto r = gate_and_select(text, candidates, model, rob, key);
    check_decision(r, rob, text);
    require(render_final(gate_and_select(text, candidates, model, rob, key)) == render_final(r),
            "not reproducible for '" + text + "'");
    const auto s = gate_and_select(text, candidates, model, susan, key);
    check_decision(s, susan, text);
    require(s.prefix_suppressed_reason == PrefixSuppression::SentimentDisabled && !s.fallback,
            "Susan arm used sentiment for '" + text + "'");
    for (const auto& p : susan.all_prefixes())
      require(render_final(s).find(p) == std::string::npos, "Susan output contains '" + p + "'");
    prefixed += r.prefix.has_value();
    kicks += r.kicked_bots().size();
    fallbacks += r.fallback;
    if (r.prefix_suppressed_reason) ++reasons[std::string(to_string(*r.prefix_suppressed_reason))];
  }
  require(prefixed > 0 && kicks > 0, "randomized turns never exercised prefixes or kicks");
  return "10000 turns per arm; " + std::to_string(prefixed) + " prefixed, " + std::to_string(kicks) + " kicks, " +
         std::to_string(fallbacks) + " fallbacks";
}

// The child runs the service and reports each acknowledged operation on a
// pipe until it is killed.
[[noreturn]] void service_child(const std::filesystem::path& dir, int fd) {
  ChatService svc(testing_support::fixture_pipeline(), dir);
  const std::vector<std::string> lines{"i am so sad today", "tell me a joke", "i love this", "my dog died",
                                       "news about death note", "i hate you", "hello there", "i am not happy"};
  auto ack = [&](const std::string& s) {
    const auto line = s + "\n";
    if (::write(fd, line.data(), line.size()) < 0) ::_exit(0);
  };
  for (std::size_t i = 0;; ++i) {
    const auto s = svc.create_session();
    ack("S " + s.session_id);
    for (std::size_t t = 0; t < 3; ++t) {
      svc.post_message(s.session_id, lines[(i + t) % lines.size()]);
      ack("T " + s.session_id + " " + std::to_string(t));
    }
    if (i % 2 == 0) {
      SurveyRecord r;
      r.session_id = s.session_id;
      r.understood = i % 3 == 0;
      r.rating = static_cast<int>(i % 6);
      svc.submit_survey(std::move(r));
      ack("V " + s.session_id + " " + std::to_string(i % 6));
    }
    ack("E " + ChatService::export_record(*svc.session(s.session_id)).dump());
  }
}

std::string service_persistence() {
  testing_support::shared_fixture_model();  // train before forking
  testing_support::TempDir dir;
  int fds[2];
  require(::pipe(fds) == 0, "pipe failed");
  const pid_t pid = ::fork();
  require(pid >= 0, "fork failed");
  if (pid == 0) {
    ::close(fds[0]);
    service_child(dir.path(), fds[1]);
  }
  ::close(fds[1]);
  std::vector<std::string> acks;
  std::string buffer;
  char buf[4096];
  while (acks.size() < 400) {
    const auto n = ::read(fds[0], buf, sizeof buf);
    if (n <= 0) break;
    buffer.append(buf, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      acks.push_back(buffer.substr(0, nl));
      buffer.erase(0, nl + 1);
    }
  }
  ::kill(pid, SIGKILL);
  ::waitpid(pid, nullptr, 0);
  // Drain acks that were written before the kill.
  ssize_t n;
  while ((n = ::read(fds[0], buf, sizeof buf)) > 0) buffer.append(buf, static_cast<std::size_t>(n));
  ::close(fds[0]);
  std::size_t nl;
  while ((nl = buffer.find('\n')) != std::string::npos) {
    acks.push_back(buffer.substr(0, nl));
    buffer.erase(0, nl + 1);
  }
  require(acks.size() >= 400, "child stopped early after " + std::to_string(acks.size()) + " acks");

  std::string first_export;
  std::size_t exact = 0;
  {
    ChatService svc(testing_support::fixture_pipeline(), dir.path());
    for (const auto& a : acks) {
      if (a.starts_with("E ")) {
        const auto expected = a.substr(2);
        const auto id = nlohmann::json::parse(expected)["session_id"].get<std::string>();
        const auto s = svc.session(id);
        require(s.has_value(), "exported session " + id + " lost");
        require(ChatService::export_record(*s).dump() == expected, "export of " + id + " changed across the kill");
        ++exact;
        continue;
      }
      std::istringstream in(a);
      std::string op, id;
      in >> op >> id;
      const auto s = svc.session(id);
      require(s.has_value(), "acknowledged session " + id + " lost");
      if (op == "T") {
        std::size_t t;
        in >> t;
        require(s->turns.size() > t, "acknowledged turn " + std::to_string(t) + " of " + id + " lost");
      } else if (op == "V") {
        int rating;
        in >> rating;
        require(s->survey && s->survey->rating == rating, "acknowledged survey of " + id + " lost");
      }
    }
    const auto prefixes = svc.pipeline().gating.all_prefixes();
    auto prefixed = [&](const std::string& text) {
      return std::any_of(prefixes.begin(), prefixes.end(),
                         [&](const auto& p) { return text.find(p) != std::string::npos; });
    };
    std::size_t rob_prefixed = 0;
    for (const auto& s : svc.sessions()) {
      if (s.arm == Arm::Susan) {
        for (const auto& t : s.turns) require(!prefixed(t.final_text), "Susan turn carries a prefix: " + t.final_text);
        continue;
      }
      const auto replay = svc.create_session(Arm::Susan);
      for (const auto& t : s.turns) {
        rob_prefixed += prefixed(t.final_text);
        const auto r = svc.post_message(replay.session_id, t.user_text);
        require(!prefixed(r.final_text), "Susan replay carries a prefix: " + r.final_text);
      }
    }
    require(rob_prefixed > 0, "no Rob turn was prefixed, replay proves nothing");
    for (const auto& r : svc.export_sessions()) first_export += r.dump() + "\n";
  }
  std::string second_export;
  {
    ChatService svc(testing_support::fixture_pipeline(), dir.path());
    for (const auto& r : svc.export_sessions()) second_export += r.dump() + "\n";
  }
  require(first_export == second_export, "clean restart changed the export");
  require(exact > 0, "no completed session to compare");
  return std::to_string(acks.size()) + " acknowledged operations survived SIGKILL, " + std::to_string(exact) +
         " session exports bit-exact, Rob replays through Susan prefix-free, restart export identical";
}

std::string full_matrix() {
  ExperimentData data;
  data.human = load_corpus(fixture("demo.jsonl"));
  data.vader = load_lexicon(fixture("vader.tsv"), LexiconKind::Vader);
  data.afinn = load_lexicon(fixture("afinn.tsv"), LexiconKind::Afinn);
  data.split = SplitSpec{0.7, 0, true};
  const auto configs = default_experiment_matrix(0, data.split);
  const auto rows = run_experiment_matrix(configs, data);
  require(rows.size() == configs.size(), "row count");
  const auto table = format_matrix_table(rows);
  const auto jsonl = format_matrix_jsonl(rows);
  std::size_t lines = 0;
  std::istringstream in(jsonl);
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    require(j.contains("name") || j.is_object(), "bad JSONL row");
  }
  require(lines == rows.size(), "JSONL has " + std::to_string(lines) + " rows");
  for (const auto& c : configs) require(table.find(c.note) != std::string::npos || c.note.empty(), "table misses " + c.name);
  return std::to_string(rows.size()) + " rows in table and JSONL";
}

}  // namespace

int main() {
  criterion("metrics-arithmetic", 1, metrics_arithmetic);
  criterion("ab-arithmetic", 1, ab_arithmetic);
  criterion("kappa-oracle", 5, kappa_oracle);
  criterion("lexicon-discretization", 5, discretization);
  criterion("forest-sanity", 30, forest_sanity);
  criterion("combined-training-direction", 60, combined_training);
  criterion("afinn-oracle", 5, afinn_oracle);
  criterion("orchestrator-invariants", 30, orchestrator_invariants);
  criterion("service-persistence", 30, service_persistence);
  criterion("experiment-matrix", 600, full_matrix);
  std::cout << (failures ? "FAILED " + std::to_string(failures) + " criteria" : std::string("ALL PASS")) << std::endl;
  return failures ? 1 : 0;
}
