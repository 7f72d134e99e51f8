// clarify: train, evaluate, inspect, serve, and chat with the clarification
// dialogue engine.
//
//   clarify train --data data_full.json --out model.bin
//   clarify eval --model model.bin --data data_full.json --report-dir reports
//   clarify keywords --data data_full.json
//   clarify serve --model model.bin --port 8080
//   clarify chat --model model.bin

#include <chrono>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "clarify/corpus.hpp"
#include "clarify/dialogue.hpp"
#include "clarify/error.hpp"
#include "clarify/eval.hpp"
#include "clarify/keywords.hpp"
#include "clarify/nlu.hpp"
#include "clarify/service.hpp"
#include "clarify/text.hpp"
#include "httplib.h"

namespace {

using namespace clarify;

struct SplitFlags {
  std::size_t n_intents = 30;
  std::size_t n_test = 10;
  std::size_t n_val = 20;
};

void print_config(const nlohmann::json& config) { std::cerr << nlohmann::json{{"config", config}}.dump() << "\n"; }

void add_engine_flags(CLI::App* cmd, dialogue::EngineConfig& cfg) {
  cmd->add_option("--tau-direct", cfg.tau_direct, "Confidence at or above which the top intent is answered")
      ->envname("CLARIFY_TAU_DIRECT");
  cmd->add_option("--tau-fallback", cfg.tau_fallback, "Confidence below which the FAQ is shown directly")
      ->envname("CLARIFY_TAU_FALLBACK");
  cmd->add_option("--max-suggestions", cfg.max_suggestions, "Maximum suggestions offered after a rejection");
  cmd->add_option("--faq-topics", cfg.faq_topic_count, "Number of FAQ topics");
}

void add_split_flags(CLI::App* cmd, SplitFlags& s) {
  cmd->add_option("--n-intents", s.n_intents, "Intents with test/validation queries (file order)");
  cmd->add_option("--n-test", s.n_test, "Test formulations per intent");
  cmd->add_option("--n-val", s.n_val, "Validation formulations per intent");
}

int cmd_corpus(const std::string& data, const std::string& sidecar, const SplitFlags& s) {
  print_config({{"data", data}, {"n_intents", s.n_intents}, {"n_test", s.n_test}, {"n_val", s.n_val}});
  const auto corpus = apply_eval_split(load_clinc_corpus(data, sidecar), s.n_intents, s.n_test, s.n_val);
  std::cout << corpus.summary().dump(2) << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& sidecar, const std::string& out,
              const nlu::Hyperparams& hp, std::size_t k) {
  print_config({{"data", data}, {"out", out}, {"hyperparams", nlu::to_json(hp)}, {"keywords_per_intent", k}});
  const auto corpus = load_clinc_corpus(data, sidecar);
  const auto start = std::chrono::steady_clock::now();
  const auto model = nlu::train(corpus, hp);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  service::save_model(model, corpus, out, k);
  std::size_t correct = 0;
  const auto train = corpus.examples_in(Split::Train);
  for (const auto& ex : train) correct += model.predict(ex.text).top().intent == ex.intent;
  std::cout << nlohmann::json{{"model", out},
                              {"intents", model.intents().size()},
                              {"features", model.vocabulary().size()},
                              {"train_accuracy", static_cast<double>(correct) / static_cast<double>(train.size())},
                              {"train_seconds", secs},
                              {"corpus_fingerprint", model.corpus_fingerprint()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& sidecar,
             const std::string& report_dir, const dialogue::EngineConfig& cfg, double grid_step, const SplitFlags& s) {
  const auto grid = eval::default_grid(grid_step);
  print_config({{"model", model_path},
                {"data", data},
                {"report_dir", report_dir},
                {"engine", cfg.to_json()},
                {"grid_step", grid_step},
                {"split", {{"n_intents", s.n_intents}, {"n_test", s.n_test}, {"n_val", s.n_val}}}});
  const auto loaded = load_clinc_corpus(data, sidecar);
  const auto engine = service::load_engine(model_path, cfg);
  const auto& model = engine.model();
  print_config({{"hyperparams", nlu::to_json(model.hyperparams())}});
  if (model.corpus_fingerprint() != loaded.fingerprint()) {
    std::cerr << "warning: model was trained on a different corpus (fingerprint " << model.corpus_fingerprint()
              << " vs " << loaded.fingerprint() << ")\n";
  }
  const auto corpus = apply_eval_split(loaded, s.n_intents, s.n_test, s.n_val);
  const auto test = corpus.examples_in(Split::Test);
  const auto validation = corpus.examples_in(Split::Validation);

  const double optimized = eval::optimize_threshold(model, validation, grid);
  std::vector<eval::EvalReport> reports;
  reports.push_back(eval::evaluate_baseline(model, test, cfg.tau_direct, eval::BaselineMode::Simple));
  reports.push_back(eval::evaluate_baseline(model, test, optimized, eval::BaselineMode::Optimized));
  reports.push_back(eval::evaluate_pipeline(engine, test));

  std::cout << "optimized threshold: " << optimized << "\n\n" << eval::comparison_table(reports);
  if (reports.back().funnel) std::cout << "\nfunnel: " << reports.back().funnel->to_json().dump() << "\n";
  for (const auto& p : eval::emit_report(reports, report_dir)) std::cerr << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_keywords(const std::string& data, const std::string& sidecar, const std::string& model_path, std::size_t k) {
  print_config({{"data", data}, {"model", model_path}, {"k", k}});
  keywords::KeywordMap kw;
  std::vector<IntentId> order;
  if (!data.empty()) {
    const auto corpus = load_clinc_corpus(data, sidecar);
    kw = keywords::extract_keywords(keywords::compute_tfidf(corpus), k);
    order = corpus.intents();
  } else {
    const auto loaded = nlu::load_model(model_path);
    if (!loaded.extra.contains("keywords")) throw FormatError("model file has no keyword table");
    kw = keywords::keywords_from_json(loaded.extra["keywords"]);
    order = loaded.model.intents();
  }
  std::cout << "intent\tkeyword\tscore\n";
  for (const auto& intent : order) {
    for (const auto& w : kw[intent]) std::cout << intent << '\t' << w.term << '\t' << w.score << '\n';
  }
  return 0;
}

int cmd_serve(const std::string& model_path, const std::string& host, int port, const dialogue::EngineConfig& cfg,
              int ttl_minutes, const std::string& log_path) {
  print_config({{"model", model_path}, {"host", host}, {"port", port}, {"engine", cfg.to_json()},
                {"ttl_minutes", ttl_minutes}, {"transcript_log", log_path}});
  auto engine = std::make_shared<const dialogue::Engine>(service::load_engine(model_path, cfg));
  service::ServiceOptions opts;
  opts.ttl = std::chrono::minutes(ttl_minutes);
  opts.transcript_log = log_path;
  service::Service svc(engine, opts);
  httplib::Server server;
  service::install_routes(server, svc);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

void show(const dialogue::BotAction& a) {
  std::cout << "bot> " << a.text << "\n";
  using dialogue::ActionKind;
  switch (a.kind) {
    case ActionKind::ConfirmPrompt: std::cout << "     [yes] [no]\n"; break;
    case ActionKind::SuggestionList:
      for (std::size_t i = 0; i < a.options.size(); ++i) std::cout << "     " << i + 1 << ") " << a.options[i] << "\n";
      std::cout << "     0) None of the above\n";
      break;
    case ActionKind::FaqTopicList:
    case ActionKind::FaqIntentList:
      for (std::size_t i = 0; i < a.options.size(); ++i) std::cout << "     " << i + 1 << ") " << a.options[i] << "\n";
      std::cout << "     [back]\n";
      break;
    default: break;
  }
}

// Numbers, yes/no, "none", and "back" are structured replies when legal for
// the current stage; anything else is a new question.
dialogue::UserInput parse_chat_input(const std::string& line, dialogue::Stage stage) {
  using dialogue::Stage;
  const auto t = text::to_lower(text::trim(line));
  std::size_t n = 0;
  bool numeric = !t.empty() && t.find_first_not_of("0123456789") == std::string::npos && t.size() < 6;
  if (numeric) n = std::stoul(t);
  switch (stage) {
    case Stage::AwaitingConfirmation:
      if (t == "yes" || t == "y") return dialogue::Confirmation::Yes;
      if (t == "no" || t == "n") return dialogue::Confirmation::No;
      break;
    case Stage::AwaitingSuggestionChoice:
      if (t == "none" || (numeric && n == 0)) return dialogue::SuggestionChoice{std::nullopt};
      if (numeric) return dialogue::SuggestionChoice{n - 1};
      break;
    case Stage::FaqTopics:
    case Stage::FaqIntents:
      if (t == "back") return dialogue::FaqNavigation{dialogue::FaqNavigation::Kind::Back, 0};
      if (numeric && n > 0) {
        return dialogue::FaqNavigation{stage == Stage::FaqTopics ? dialogue::FaqNavigation::Kind::Topic
                                                                  : dialogue::FaqNavigation::Kind::Intent,
                                       n - 1};
      }
      break;
    case Stage::Idle: break;
  }
  return dialogue::TextInput{line};
}

int cmd_chat(const std::string& model_path, const dialogue::EngineConfig& cfg) {
  print_config({{"model", model_path}, {"engine", cfg.to_json()}});
  const auto engine = service::load_engine(model_path, cfg);
  dialogue::Session session;
  std::cout << "Ask a question (\"quit\" to exit).\n";
  std::string line;
  while (std::cout << "you> " << std::flush, std::getline(std::cin, line)) {
    if (text::trim(line) == "quit") break;
    if (text::trim(line).empty()) continue;
    try {
      show(engine.handle(session, parse_chat_input(line, session.stage)));
    } catch (const ProtocolError& e) {
      std::cout << "bot> " << e.what() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Question-answering dialogue engine with a multi-stage clarification pipeline"};
  app.require_subcommand(1);

  std::string data, sidecar, model_path, out = "model.bin", report_dir = "reports", host = "0.0.0.0", log_path;
  nlu::Hyperparams hp;
  dialogue::EngineConfig cfg;
  SplitFlags split;
  std::size_t k = 5;
  double grid_step = 0.05;
  int port = 8080, ttl_minutes = 30;

  auto* corpus_cmd = app.add_subcommand("corpus", "Load a dataset, apply the split, print counts");
  corpus_cmd->add_option("--data", data, "Dataset file")->required();
  corpus_cmd->add_option("--canonical", sidecar, "intent<TAB>sentence canonical form overrides");
  add_split_flags(corpus_cmd, split);

  auto* train_cmd = app.add_subcommand("train", "Train the intent classifier and write a model file");
  train_cmd->add_option("--data", data, "Dataset file")->required();
  train_cmd->add_option("--canonical", sidecar, "intent<TAB>sentence canonical form overrides");
  train_cmd->add_option("--out", out, "Output model path");
  train_cmd->add_option("--epochs", hp.epochs, "Training epochs");
  train_cmd->add_option("--learning-rate", hp.learning_rate, "SGD learning rate");
  train_cmd->add_option("--l2", hp.l2, "L2 regularization strength");
  train_cmd->add_option("--batch-size", hp.batch_size, "Minibatch size");
  train_cmd->add_option("--seed", hp.seed, "Shuffling seed");
  train_cmd->add_option("--keywords", k, "TF-IDF keywords per intent");

  auto* eval_cmd = app.add_subcommand("eval", "Compare simple fallback, optimized fallback, and clarification");
  eval_cmd->add_option("--model", model_path, "Model file")->required();
  eval_cmd->add_option("--data", data, "Dataset file")->required();
  eval_cmd->add_option("--canonical", sidecar, "intent<TAB>sentence canonical form overrides");
  eval_cmd->add_option("--report-dir", report_dir, "Directory for report files");
  eval_cmd->add_option("--grid-step", grid_step, "Threshold grid step for the optimized baseline");
  add_engine_flags(eval_cmd, cfg);
  add_split_flags(eval_cmd, split);

  auto* kw_cmd = app.add_subcommand("keywords", "Dump the TF-IDF keyword table");
  auto* kw_src = kw_cmd->add_option_group("source");
  kw_src->add_option("--data", data, "Dataset file");
  kw_src->add_option("--model", model_path, "Model file");
  kw_src->require_option(1);
  kw_cmd->add_option("--canonical", sidecar, "intent<TAB>sentence canonical form overrides");
  kw_cmd->add_option("-k,--top", k, "Keywords per intent");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the dialogue API over HTTP");
  serve_cmd->add_option("--model", model_path, "Model file")->required()->envname("CLARIFY_MODEL");
  serve_cmd->add_option("--host", host, "Bind address")->envname("CLARIFY_HOST");
  serve_cmd->add_option("--port", port, "Port")->envname("CLARIFY_PORT");
  serve_cmd->add_option("--ttl-minutes", ttl_minutes, "Idle session lifetime")->envname("CLARIFY_SESSION_TTL");
  serve_cmd->add_option("--transcript-log", log_path, "Append transcripts to this file");
  add_engine_flags(serve_cmd, cfg);

  auto* chat_cmd = app.add_subcommand("chat", "Interactive terminal chat");
  chat_cmd->add_option("--model", model_path, "Model file")->required();
  add_engine_flags(chat_cmd, cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.validate();
    if (*corpus_cmd) return cmd_corpus(data, sidecar, split);
    if (*train_cmd) return cmd_train(data, sidecar, out, hp, k);
    if (*eval_cmd) return cmd_eval(model_path, data, sidecar, report_dir, cfg, grid_step, split);
    if (*kw_cmd) return cmd_keywords(data, sidecar, model_path, k);
    if (*serve_cmd) return cmd_serve(model_path, host, port, cfg, ttl_minutes, log_path);
    if (*chat_cmd) return cmd_chat(model_path, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
