#include "clarify/dialogue.hpp"

#include <algorithm>
#include <chrono>

#include "clarify/error.hpp"

namespace clarify::dialogue {

void EngineConfig::validate() const {
  if (!(tau_fallback >= 0.0 && tau_fallback < tau_direct && tau_direct <= 1.0)) {
    throw ConfigError("thresholds must satisfy 0 <= tau_fallback < tau_direct <= 1");
  }
  if (max_suggestions == 0) throw ConfigError("max_suggestions must be positive");
}

nlohmann::json EngineConfig::to_json() const {
  return {{"tau_direct", tau_direct},
          {"tau_fallback", tau_fallback},
          {"max_suggestions", max_suggestions},
          {"faq_topic_count", faq_topic_count}};
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Idle: return "Idle";
    case Stage::AwaitingConfirmation: return "AwaitingConfirmation";
    case Stage::AwaitingSuggestionChoice: return "AwaitingSuggestionChoice";
    case Stage::FaqTopics: return "FaqTopics";
    case Stage::FaqIntents: return "FaqIntents";
  }
  return "Unknown";
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::DirectAnswer: return "DirectAnswer";
    case ActionKind::ConfirmPrompt: return "ConfirmPrompt";
    case ActionKind::SuggestionList: return "SuggestionList";
    case ActionKind::FaqTopicList: return "FaqTopicList";
    case ActionKind::FaqIntentList: return "FaqIntentList";
    case ActionKind::Answer: return "Answer";
    case ActionKind::NoSuggestionsFallback: return "NoSuggestionsFallback";
  }
  return "Unknown";
}

nlohmann::json BotAction::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["text"] = text;
  j["options"] = options;
  j["intents"] = intents;
  j["resolved_intent"] = resolved_intent ? nlohmann::json(*resolved_intent) : nlohmann::json(nullptr);
  j["confidence"] = confidence ? nlohmann::json(*confidence) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const UserInput& input) {
  struct Visitor {
    nlohmann::json operator()(const TextInput& t) const { return {{"type", "text"}, {"text", t.text}}; }
    nlohmann::json operator()(Confirmation c) const {
      return {{"type", "confirm"}, {"value", c == Confirmation::Yes ? "yes" : "no"}};
    }
    nlohmann::json operator()(const SuggestionChoice& c) const {
      if (!c.index) return {{"type", "none"}};
      return {{"type", "choice"}, {"index", *c.index}};
    }
    nlohmann::json operator()(const FaqNavigation& n) const {
      switch (n.kind) {
        case FaqNavigation::Kind::Topic: return {{"type", "faq_topic"}, {"index", n.index}};
        case FaqNavigation::Kind::Intent: return {{"type", "faq_intent"}, {"index", n.index}};
        case FaqNavigation::Kind::Back: break;
      }
      return {{"type", "back"}};
    }
  };
  return std::visit(Visitor{}, input);
}

UserInput user_input_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw FormatError("reply must be an object with a string 'type'");
  }
  const auto type = j["type"].get<std::string>();
  auto index = [&]() -> std::size_t {
    if (!j.contains("index") || !j["index"].is_number_integer() || j["index"].get<long long>() < 0) {
      throw FormatError("'" + type + "' reply needs a non-negative integer 'index'");
    }
    return j["index"].get<std::size_t>();
  };
  if (type == "text") {
    if (!j.contains("text") || !j["text"].is_string()) throw FormatError("'text' reply needs a string 'text'");
    return TextInput{j["text"].get<std::string>()};
  }
  if (type == "confirm") {
    const auto v = j.value("value", std::string{});
    if (v == "yes") return Confirmation::Yes;
    if (v == "no") return Confirmation::No;
    throw FormatError("'confirm' reply needs value 'yes' or 'no'");
  }
  if (type == "choice") return SuggestionChoice{index()};
  if (type == "none") return SuggestionChoice{std::nullopt};
  if (type == "faq_topic") return FaqNavigation{FaqNavigation::Kind::Topic, index()};
  if (type == "faq_intent") return FaqNavigation{FaqNavigation::Kind::Intent, index()};
  if (type == "back") return FaqNavigation{FaqNavigation::Kind::Back, 0};
  throw FormatError("unknown reply type '" + type + "'");
}

nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& transcript) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : transcript) {
    arr.push_back({{"actor", e.actor == Actor::User ? "user" : "bot"},
                   {"content", e.content},
                   {"timestamp_ms", e.timestamp_ms}});
  }
  return arr;
}

std::vector<std::string> expected_replies(Stage stage) {
  switch (stage) {
    case Stage::Idle: return {"text"};
    case Stage::AwaitingConfirmation: return {"text", "confirm"};
    case Stage::AwaitingSuggestionChoice: return {"text", "choice", "none"};
    case Stage::FaqTopics: return {"text", "faq_topic", "back"};
    case Stage::FaqIntents: return {"text", "faq_intent", "back"};
  }
  return {"text"};
}

std::vector<std::string> faq_topics(const keywords::KeywordIndex& index, std::size_t n) {
  std::vector<std::pair<std::string, std::size_t>> terms;
  for (const auto& [term, intents] : index.intents_of()) terms.emplace_back(term, intents.size());
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < terms.size() && i < n; ++i) out.push_back(terms[i].first);
  return out;
}

Route route(double confidence, const EngineConfig& config) {
  if (confidence >= config.tau_direct) return Route::Direct;
  if (confidence >= config.tau_fallback) return Route::Confirm;
  return Route::Faq;
}

Engine::Engine(std::shared_ptr<const nlu::IntentModel> model, Catalog catalog, keywords::KeywordIndex index,
               EngineConfig config)
    : model_(std::move(model)), catalog_(std::move(catalog)), index_(std::move(index)), config_(config) {
  if (!model_) throw ConfigError("engine needs a model");
  config_.validate();
  for (const auto& intent : model_->intents()) {
    if (!catalog_.contains(intent)) throw ConfigError("catalog has no entry for model intent '" + intent + "'");
  }
  topics_ = faq_topics(index_, config_.faq_topic_count);
}

Engine Engine::with_config(EngineConfig config) const { return Engine(model_, catalog_, index_, config); }

namespace {

void reset(Session& s) {
  s.stage = Stage::Idle;
  s.pending_intent.reset();
  s.pending_query.clear();
  s.offered.clear();
  s.topics.clear();
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

[[noreturn]] void reject(const Session& s, std::string_view what) {
  throw ProtocolError(std::string(what) + " is not a legal reply in stage " + std::string(to_string(s.stage)),
                      expected_replies(s.stage));
}

}  // namespace

void Engine::record(Session& session, const UserInput& input, const BotAction& action) const {
  const auto ts = now_ms();
  session.transcript.push_back({Actor::User, to_json(input), ts});
  session.transcript.push_back({Actor::Bot, action.to_json(), ts});
}

BotAction Engine::answer(Session& session, const IntentId& intent, ActionKind kind) const {
  BotAction a;
  a.kind = kind;
  a.text = catalog_.at(intent).answer;
  a.resolved_intent = intent;
  reset(session);
  return a;
}

BotAction Engine::enter_faq(Session& session) const {
  reset(session);
  BotAction a;
  if (topics_.empty()) {
    a.kind = ActionKind::NoSuggestionsFallback;
    a.text = "Sorry, I could not find an answer to your question.";
    return a;
  }
  a.kind = ActionKind::FaqTopicList;
  a.text = "Here are some frequently asked topics:";
  a.options = topics_;
  session.stage = Stage::FaqTopics;
  session.topics = topics_;
  return a;
}

BotAction Engine::handle_message(Session& session, std::string_view text) const {
  return handle_predicted(session, text, model_->predict(text));
}

BotAction Engine::handle_predicted(Session& session, std::string_view text, const nlu::Prediction& prediction) const {
  reset(session);
  session.last_prediction = prediction;
  const auto& top = prediction.top();
  BotAction a;
  switch (route(top.confidence, config_)) {
    case Route::Direct:
      a = answer(session, top.intent, ActionKind::DirectAnswer);
      break;
    case Route::Confirm:
      a.kind = ActionKind::ConfirmPrompt;
      a.text = catalog_.at(top.intent).canonical_form;
      a.intents = {top.intent};
      session.stage = Stage::AwaitingConfirmation;
      session.pending_intent = top.intent;
      session.pending_query = std::string(text);
      break;
    case Route::Faq:
      a = enter_faq(session);
      break;
  }
  a.confidence = top.confidence;
  record(session, TextInput{std::string(text)}, a);
  return a;
}

BotAction Engine::handle_confirmation(Session& session, Confirmation reply) const {
  if (session.stage != Stage::AwaitingConfirmation) reject(session, "confirmation");
  BotAction a;
  if (reply == Confirmation::Yes) {
    a = answer(session, *session.pending_intent, ActionKind::Answer);
  } else {
    const auto prediction = session.last_prediction ? *session.last_prediction : model_->predict(session.pending_query);
    const auto suggestions = keywords::suggest(index_, catalog_, prediction, session.pending_query,
                                               {*session.pending_intent}, config_.max_suggestions);
    if (suggestions.empty()) {
      a = enter_faq(session);
    } else {
      reset(session);
      a.kind = ActionKind::SuggestionList;
      a.text = "Did you mean one of the following?";
      for (const auto& s : suggestions) {
        a.options.push_back(s.canonical_form);
        a.intents.push_back(s.intent);
      }
      session.stage = Stage::AwaitingSuggestionChoice;
      session.offered = a.intents;
    }
  }
  record(session, reply, a);
  return a;
}

BotAction Engine::handle_suggestion_choice(Session& session, SuggestionChoice choice) const {
  if (session.stage != Stage::AwaitingSuggestionChoice) reject(session, "suggestion choice");
  if (choice.index && *choice.index >= session.offered.size()) {
    throw ProtocolError("choice " + std::to_string(*choice.index) + " is out of range (" +
                            std::to_string(session.offered.size()) + " suggestions offered)",
                        expected_replies(session.stage));
  }
  const auto a = choice.index ? answer(session, session.offered[*choice.index], ActionKind::Answer) : enter_faq(session);
  record(session, choice, a);
  return a;
}

BotAction Engine::handle_faq_navigation(Session& session, FaqNavigation nav) const {
  if (session.stage != Stage::FaqTopics && session.stage != Stage::FaqIntents) reject(session, "FAQ navigation");
  BotAction a;
  switch (nav.kind) {
    case FaqNavigation::Kind::Back:
      a = enter_faq(session);
      break;
    case FaqNavigation::Kind::Topic: {
      if (session.stage != Stage::FaqTopics) reject(session, "faq_topic");
      if (nav.index >= session.topics.size()) {
        throw ProtocolError("topic " + std::to_string(nav.index) + " is out of range", expected_replies(session.stage));
      }
      const auto topic = session.topics[nav.index];
      const auto& linked = index_.linked(topic);
      std::vector<IntentId> intents(linked.begin(), linked.end());
      std::stable_sort(intents.begin(), intents.end(), [&](const IntentId& x, const IntentId& y) {
        return catalog_.at(x).train_examples > catalog_.at(y).train_examples;
      });
      a.kind = ActionKind::FaqIntentList;
      a.text = "Questions about " + topic + ":";
      for (const auto& intent : intents) a.options.push_back(catalog_.at(intent).canonical_form);
      a.intents = intents;
      session.stage = Stage::FaqIntents;
      session.offered = std::move(intents);
      break;
    }
    case FaqNavigation::Kind::Intent: {
      if (session.stage != Stage::FaqIntents) reject(session, "faq_intent");
      if (nav.index >= session.offered.size()) {
        throw ProtocolError("intent " + std::to_string(nav.index) + " is out of range",
                            expected_replies(session.stage));
      }
      a = answer(session, session.offered[nav.index], ActionKind::Answer);
      break;
    }
  }
  record(session, nav, a);
  return a;
}

BotAction Engine::handle(Session& session, const UserInput& input) const {
  struct Visitor {
    const Engine& e;
    Session& s;
    BotAction operator()(const TextInput& t) const { return e.handle_message(s, t.text); }
    BotAction operator()(Confirmation c) const { return e.handle_confirmation(s, c); }
    BotAction operator()(const SuggestionChoice& c) const { return e.handle_suggestion_choice(s, c); }
    BotAction operator()(const FaqNavigation& n) const { return e.handle_faq_navigation(s, n); }
  };
  return std::visit(Visitor{*this, session}, input);
}

std::vector<BotAction> replay(const Engine& engine, const std::vector<TranscriptEntry>& transcript) {
  Session session;
  std::vector<BotAction> out;
  for (const auto& entry : transcript) {
    if (entry.actor == Actor::User) out.push_back(engine.handle(session, user_input_from_json(entry.content)));
  }
  return out;
}

}  // namespace clarify::dialogue

namespace clarify::dialogue {

nlohmann::json engine_assets(const Catalog& catalog, const keywords::KeywordMap& keywords) {
  return {{"catalog", catalog.to_json()}, {"keywords", keywords::to_json(keywords)}};
}

Engine build_engine(std::shared_ptr<const nlu::IntentModel> model, const TrainingCorpus& corpus, EngineConfig config,
                    std::size_t keywords_per_intent) {
  auto catalog = Catalog::from_corpus(corpus);
  const auto kw = keywords::extract_keywords(keywords::compute_tfidf(corpus), keywords_per_intent);
  auto index = keywords::build_keyword_index(kw, catalog);
  return Engine(std::move(model), std::move(catalog), std::move(index), config);
}

Engine engine_from_assets(std::shared_ptr<const nlu::IntentModel> model, const nlohmann::json& assets,
                          EngineConfig config) {
  if (!assets.contains("catalog") || !assets.contains("keywords")) {
    throw FormatError("model file carries no dialogue assets (catalog, keywords)");
  }
  auto catalog = Catalog::from_json(assets.at("catalog"));
  auto index = keywords::build_keyword_index(keywords::keywords_from_json(assets.at("keywords")), catalog);
  return Engine(std::move(model), std::move(catalog), std::move(index), config);
}

}  // namespace clarify::dialogue
