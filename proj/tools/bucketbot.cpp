// bucketbot: corpus preparation, agreement, training, evaluation, the
// experiment matrix, prediction, A/B reporting and the chat service.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "bucketbot/agreement.hpp"
#include "bucketbot/chat_service.hpp"
#include "bucketbot/experiment.hpp"
#include "bucketbot/http_api.hpp"
#include "bucketbot/synthetic.hpp"

namespace fs = std::filesystem;
using namespace bucketbot;

namespace {

// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    detail::write_file(path, content);
  }
}

Lexicon maybe_lexicon(const std::string& path, LexiconKind kind) {
  return path.empty() ? Lexicon{} : load_lexicon(path, kind);
}

std::string format_distribution(const Distribution& d) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (k) o << ' ';
    o << to_token(label_from_index(k)) << ':' << d[k];
  }
  return o.str();
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string lexicon, pool, opinion_lexicon, out, out_dir;
  std::size_t generate = 0, n_lexical = 0, n_random = 0, annotators = 0;
  double overlap = 0.1;
  std::uint64_t seed = 0;
};

void run_prepare(const PrepareArgs& a) {
  const int modes = !a.lexicon.empty() + (a.generate > 0) + !a.pool.empty();
  if (modes != 1) throw Error("prepare: give exactly one of --lexicon, --generate, --pool");

  if (!a.lexicon.empty()) {
    const auto samples = build_lexicon_samples(load_lexicon(a.lexicon, LexiconKind::Vader));
    emit(a.out, serialize_corpus(samples, a.out.empty() ? CorpusFormat::TSV : format_from_path(a.out)));
    std::cerr << samples.size() << " lexicon-word samples\n";
    return;
  }
  if (a.generate > 0) {
    DialogueCorpusOptions opts;
    opts.records = a.generate;
    opts.seed = a.seed;
    const auto corpus = generate_dialogue_corpus(opts);
    emit(a.out, serialize_corpus(corpus, a.out.empty() ? CorpusFormat::TSV : format_from_path(a.out)));
    return;
  }

  std::unordered_set<std::string> opinion;
  if (a.opinion_lexicon.empty()) throw Error("prepare --pool needs --opinion-lexicon");
  for (const auto& e : load_lexicon(a.opinion_lexicon, LexiconKind::Vader)) opinion.insert(e.word);
  std::vector<std::string> pool;
  for (auto& line : detail::read_lines(a.pool))
    if (!detail::trim(line).empty()) pool.emplace_back(detail::trim(line));
  const auto chosen = sample_candidate_utterances(pool, opinion, a.n_lexical, a.n_random, a.seed);
  if (a.annotators == 0) {
    std::string out;
    for (const auto& s : chosen) out += s + "\n";
    emit(a.out, out);
    return;
  }
  if (a.out_dir.empty()) throw Error("prepare --annotators needs --out-dir");
  fs::create_directories(a.out_dir);
  for (const auto& part : split_for_annotators(chosen, a.annotators, a.overlap, a.seed)) {
    std::string out;
    for (const auto& s : part.unique) out += s + "\n";
    for (const auto& s : part.overlap) out += s + "\n";
    detail::write_file((fs::path(a.out_dir) / (part.annotator + ".txt")).string(), out);
    std::cerr << part.annotator << ": " << part.unique.size() << " + " << part.overlap.size()
              << " shared with " << part.overlap_with << '\n';
  }
}

// ---------------------------------------------------------------------------

struct KappaArgs {
  std::string overlap, mode = "strict-skips";
  bool pairwise = false;
};

void run_kappa(const KappaArgs& a) {
  const auto mode = a.mode == "ignore-skips" ? SkipMode::IgnoreSkips : SkipMode::StrictSkips;
  const auto overlap = load_overlap(a.overlap);
  const double k = a.pairwise ? pairwise_mean_kappa(overlap, mode) : pooled_kappa(overlap, mode);
  std::cout << std::fixed << std::setprecision(4) << k << '\n';
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string corpus, lexicon, afinn, out, kind = "random_forest";
  std::size_t trees = 25, categories = 5, min_leaf = 1, max_features = 0, vocab_size = 5000, min_frequency = 1;
  unsigned threads = 0;
  double alpha = 1.0;
  bool no_lexicon_samples = false, exclude_ambiguous = false;
  std::uint64_t seed = 0;
};

TrainSpec train_spec(const TrainArgs& a) {
  const auto kind = model_kind_from_string(a.kind);
  if (!kind) throw Error("unknown model kind '" + a.kind + "'");
  TrainSpec s;
  s.kind = *kind;
  s.n_trees = a.trees;
  s.seed = a.seed;
  s.forest.min_leaf = a.min_leaf;
  s.forest.max_features = a.max_features;
  s.forest.threads = a.threads;
  s.alpha = a.alpha;
  s.vocabulary.max_size = a.vocab_size;
  s.vocabulary.min_frequency = a.min_frequency;
  return s;
}

void run_train(const TrainArgs& a) {
  const auto spec = train_spec(a);
  if (a.categories != 3 && a.categories != 5) throw Error("--categories must be 3 or 5");
  AnnotatedCorpus train;
  if (!a.corpus.empty()) train = load_corpus(a.corpus);
  if (a.exclude_ambiguous) std::erase_if(train, [](const auto& u) { return u.ambiguous; });

  Lexicon lexicon;
  if (spec.kind == ModelKind::Afinn) {
    lexicon = load_lexicon(a.afinn.empty() ? a.lexicon : a.afinn, LexiconKind::Afinn);
  } else {
    lexicon = maybe_lexicon(a.lexicon, LexiconKind::Vader);
    if (is_trainable(spec.kind) && !a.no_lexicon_samples) {
      const auto samples = build_lexicon_samples(lexicon);
      train.insert(train.end(), samples.begin(), samples.end());
    }
  }
  if (is_trainable(spec.kind) && train.empty()) throw Error("train: --corpus is required for " + a.kind);
  if (spec.kind == ModelKind::Vader && lexicon.empty()) throw Error("train: --lexicon is required for vader");
  if (a.categories == 3) train = collapse_corpus(std::move(train));

  const auto model = train_model(train, spec, lexicon);
  emit(a.out, save_model(model));
  std::cerr << "trained " << to_string(model.kind()) << " on " << train.size() << " records\n";
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model, corpus, out, format = "table";
  bool three_class = false, holdout = false;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto model = load_model(a.model);
  auto test = load_corpus(a.corpus);
  std::erase_if(test, [](const auto& u) { return u.source == RecordSource::LexiconWord; });
  if (a.holdout) test = split(test, SplitSpec{a.train_fraction, a.seed, true}).test;
  if (a.three_class) test = collapse_corpus(std::move(test));
  const auto report =
      classification_report(predict_corpus(model, test, a.three_class), report_labels(a.three_class ? 3 : 5));
  if (a.format == "json")
    emit(a.out, to_json(report).dump() + "\n");
  else
    emit(a.out, format_report_table(report));
}

// ---------------------------------------------------------------------------

struct MatrixArgs {
  std::string corpus, vader, afinn, transfer, format = "table", out, table_out, jsonl_out;
  double train_fraction = 0.7;
  bool serial = false;
  std::uint64_t seed = 0;
};

void run_matrix(const MatrixArgs& a) {
  ExperimentData data;
  data.human = load_corpus(a.corpus);
  data.vader = load_lexicon(a.vader, LexiconKind::Vader);
  data.afinn = load_lexicon(a.afinn, LexiconKind::Afinn);
  if (!a.transfer.empty()) data.transfer = load_corpus(a.transfer);
  data.split = SplitSpec{a.train_fraction, a.seed, true};

  const auto configs = default_experiment_matrix(a.seed, data.split, data.transfer.has_value());
  const auto rows = run_experiment_matrix(configs, data, !a.serial);
  if (!a.table_out.empty()) detail::write_file(a.table_out, format_matrix_table(rows));
  if (!a.jsonl_out.empty()) detail::write_file(a.jsonl_out, format_matrix_jsonl(rows));
  if (a.table_out.empty() && a.jsonl_out.empty())
    emit(a.out, a.format == "jsonl" ? format_matrix_jsonl(rows) : format_matrix_table(rows));
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, input;
  std::vector<std::string> texts;
  bool json = false;
};

void run_predict(const PredictArgs& a) {
  const auto model = load_model(a.model);
  auto texts = a.texts;
  if (!a.input.empty())
    for (auto& line : detail::read_lines(a.input))
      if (!detail::trim(line).empty()) texts.push_back(std::move(line));
  if (texts.empty()) throw Error("predict: give --text or --input");
  for (const auto& t : texts) {
    const auto p = model.predict(t);
    if (a.json) {
      nlohmann::json j{{"text", t}, {"label", std::string(to_name(p.label))}};
      for (std::size_t k = 0; k < kNumLabels; ++k)
        j["distribution"][std::string(to_name(label_from_index(k)))] = p.distribution[k];
      std::cout << j.dump() << '\n';
    } else {
      std::cout << to_name(p.label) << '\t' << format_distribution(p.distribution) << '\t' << t << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

struct AbArgs {
  std::string surveys, export_path, format = "table";
};

void run_ab_report(const AbArgs& a) {
  if (a.surveys.empty() == a.export_path.empty()) throw Error("ab-report: give exactly one of --surveys, --export");
  std::vector<ArmSurvey> rows;
  if (!a.surveys.empty()) {
    rows = parse_survey_table(detail::read_file(a.surveys));
  } else {
    std::vector<Json> records;
    for (const auto& line : detail::read_lines(a.export_path))
      if (!detail::trim(line).empty()) records.push_back(Json::parse(line));
    rows = ChatService::surveys_from_export(records);
  }
  const auto s = ab_summary(rows);
  std::cout << (a.format == "json" ? to_json(s).dump() + "\n" : format_ab_summary(s));
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string config, data_dir, static_dir;
  int port = -1;
};

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void run_serve(const ServeArgs& a) {
  auto cfg = ServiceConfig::load(a.config);
  cfg.apply_environment();
  if (a.port >= 0) cfg.port = a.port;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  if (!a.static_dir.empty()) cfg.static_dir = a.static_dir;

  ChatService service(load_pipeline(cfg), cfg.data_dir);
  HttpServer server(service, cfg.static_dir);
  const int port = server.bind(cfg.host, cfg.port);
  std::cout << "listening on " << cfg.host << ':' << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen_after_bind();
  g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentiment-aware multi-bot dialogue toolkit"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Build lexicon-word samples, a generated corpus, or annotation batches");
  p->add_option("--lexicon", prep.lexicon, "VADER-style lexicon; writes its strong-word samples");
  p->add_option("--generate", prep.generate, "Generate N template utterances");
  p->add_option("--pool", prep.pool, "Candidate utterances, one per line");
  p->add_option("--opinion-lexicon", prep.opinion_lexicon, "Opinion words for --pool sampling");
  p->add_option("--n-lexical", prep.n_lexical, "Utterances with an opinion word");
  p->add_option("--n-random", prep.n_random, "Further utterances drawn at random");
  p->add_option("--annotators", prep.annotators, "Split the sample between N annotators");
  p->add_option("--overlap", prep.overlap, "Shared fraction between neighbouring annotators")->check(CLI::Range(0.0, 1.0));
  p->add_option("--out", prep.out, "Output file (stdout if omitted)");
  p->add_option("--out-dir", prep.out_dir, "Directory for annotator batches");
  p->add_option("--seed", prep.seed, "Random seed");

  KappaArgs kap;
  auto* k = app.add_subcommand("kappa", "Cohen's kappa over an overlap file");
  k->add_option("--overlap", kap.overlap, "text<TAB>A<TAB>B[<TAB>group] rows")->required()->check(CLI::ExistingFile);
  k->add_option("--mode", kap.mode, "Skip handling")->check(CLI::IsMember({"strict-skips", "ignore-skips"}));
  k->add_flag("--pairwise", kap.pairwise, "Mean of per-group kappas instead of the pooled value");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write the artifact");
  t->add_option("--corpus", tr.corpus, "Annotated corpus (.tsv or .jsonl)")->check(CLI::ExistingFile);
  t->add_option("--lexicon", tr.lexicon, "VADER-style lexicon")->check(CLI::ExistingFile);
  t->add_option("--afinn", tr.afinn, "AFINN-style lexicon for --kind afinn")->check(CLI::ExistingFile);
  t->add_option("--kind", tr.kind, "random_forest, naive_bayes, afinn or vader");
  t->add_option("--trees", tr.trees, "Forest size")->check(CLI::PositiveNumber);
  t->add_option("--categories", tr.categories, "5, or 3 to merge strong and weak grades");
  t->add_option("--min-leaf", tr.min_leaf, "Minimum records per leaf")->check(CLI::PositiveNumber);
  t->add_option("--max-features", tr.max_features, "Features tried per split (0 = sqrt of vocabulary)");
  t->add_option("--vocab-size", tr.vocab_size, "Vocabulary cap")->check(CLI::PositiveNumber);
  t->add_option("--min-frequency", tr.min_frequency, "Minimum token count")->check(CLI::PositiveNumber);
  t->add_option("--threads", tr.threads, "Training threads (0 = all cores)");
  t->add_option("--alpha", tr.alpha, "Naive Bayes smoothing");
  t->add_flag("--no-lexicon-samples", tr.no_lexicon_samples, "Do not add lexicon-word samples to training");
  t->add_flag("--exclude-ambiguous", tr.exclude_ambiguous, "Drop records flagged ambiguous");
  t->add_option("--out", tr.out, "Model artifact path")->required();
  t->add_option("--seed", tr.seed, "Random seed");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Classification report of a model on a corpus");
  e->add_option("--model", ev.model, "Model artifact")->required()->check(CLI::ExistingFile);
  e->add_option("--corpus", ev.corpus, "Annotated corpus")->required()->check(CLI::ExistingFile);
  e->add_flag("--three-class", ev.three_class, "Collapse gold and predictions to three classes");
  e->add_flag("--holdout", ev.holdout, "Score only the test part of a stratified split");
  e->add_option("--train-fraction", ev.train_fraction, "Split fraction for --holdout");
  e->add_option("--format", ev.format, "Output format")->check(CLI::IsMember({"table", "json"}));
  e->add_option("--out", ev.out, "Output file (stdout if omitted)");
  e->add_option("--seed", ev.seed, "Split seed for --holdout");

  MatrixArgs mx;
  auto* m = app.add_subcommand("matrix", "Run the experiment matrix");
  m->add_option("--corpus", mx.corpus, "Human-annotated corpus")->required()->check(CLI::ExistingFile);
  m->add_option("--vader", mx.vader, "VADER-style lexicon")->required()->check(CLI::ExistingFile);
  m->add_option("--afinn", mx.afinn, "AFINN-style lexicon")->required()->check(CLI::ExistingFile);
  m->add_option("--transfer", mx.transfer, "Corpus for the cross-corpus row")->check(CLI::ExistingFile);
  m->add_option("--train-fraction", mx.train_fraction, "Hold-out split fraction");
  m->add_option("--format", mx.format, "Format for --out")->check(CLI::IsMember({"table", "jsonl"}));
  m->add_option("--out", mx.out, "Output file (stdout if omitted)");
  m->add_option("--table-out", mx.table_out, "Write the plain-text table here");
  m->add_option("--jsonl-out", mx.jsonl_out, "Write one JSON row per line here");
  m->add_flag("--serial", mx.serial, "Run rows one after another");
  m->add_option("--seed", mx.seed, "Random seed");

  PredictArgs pr;
  auto* pd = app.add_subcommand("predict", "Classify text with a trained model");
  pd->add_option("--model", pr.model, "Model artifact")->required()->check(CLI::ExistingFile);
  pd->add_option("--text", pr.texts, "Text to classify (repeatable)");
  pd->add_option("--input", pr.input, "File with one text per line")->check(CLI::ExistingFile);
  pd->add_flag("--json", pr.json, "One JSON object per line");

  AbArgs ab;
  auto* a = app.add_subcommand("ab-report", "Survey summary per arm");
  a->add_option("--surveys", ab.surveys, "arm<TAB>understood<TAB>rating rows")->check(CLI::ExistingFile);
  a->add_option("--export", ab.export_path, "Session export from the chat service")->check(CLI::ExistingFile);
  a->add_option("--format", ab.format, "Output format")->check(CLI::IsMember({"table", "json"}));

  ServeArgs sv;
  auto* s = app.add_subcommand("serve", "Run the chat service");
  s->add_option("--config", sv.config, "Service config file")->required()->check(CLI::ExistingFile);
  s->add_option("--port", sv.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  s->add_option("--data-dir", sv.data_dir, "Record log directory");
  s->add_option("--static-dir", sv.static_dir, "Serve the browser client from here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "bucketbot: " << err.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*p) run_prepare(prep);
    if (*k) run_kappa(kap);
    if (*t) run_train(tr);
    if (*e) run_evaluate(ev);
    if (*m) run_matrix(mx);
    if (*pd) run_predict(pr);
    if (*a) run_ab_report(ab);
    if (*s) run_serve(sv);
  } catch (const std::exception& err) {
    std::cerr << "bucketbot: error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
