#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "clarify/catalog.hpp"
#include "clarify/keywords.hpp"
#include "clarify/nlu.hpp"
#include "json.hpp"

namespace clarify::dialogue {

struct EngineConfig {
  double tau_direct = 0.75;
  double tau_fallback = 0.3;
  std::size_t max_suggestions = 6;
  std::size_t faq_topic_count = 6;

  // Throws ConfigError unless 0 <= tau_fallback < tau_direct <= 1.
  void validate() const;
  nlohmann::json to_json() const;
};

enum class Stage { Idle, AwaitingConfirmation, AwaitingSuggestionChoice, FaqTopics, FaqIntents };

enum class ActionKind {
  DirectAnswer,
  ConfirmPrompt,
  SuggestionList,
  FaqTopicList,
  FaqIntentList,
  Answer,
  NoSuggestionsFallback,
};

std::string_view to_string(Stage s);
std::string_view to_string(ActionKind k);

struct BotAction {
  ActionKind kind = ActionKind::Answer;
  std::string text;
  // Display strings for list kinds; `intents` runs parallel to `options` for
  // SuggestionList/FaqIntentList and holds the pending intent for ConfirmPrompt.
  std::vector<std::string> options;
  std::vector<IntentId> intents;
  std::optional<IntentId> resolved_intent;
  std::optional<double> confidence;

  bool operator==(const BotAction&) const = default;
  nlohmann::json to_json() const;
};

struct TextInput {
  std::string text;
  bool operator==(const TextInput&) const = default;
};

enum class Confirmation { Yes, No };

// An empty index means "none of the above".
struct SuggestionChoice {
  std::optional<std::size_t> index;
  bool operator==(const SuggestionChoice&) const = default;
};

struct FaqNavigation {
  enum class Kind { Topic, Intent, Back };
  Kind kind = Kind::Back;
  std::size_t index = 0;
  bool operator==(const FaqNavigation&) const = default;
};

using UserInput = std::variant<TextInput, Confirmation, SuggestionChoice, FaqNavigation>;

nlohmann::json to_json(const UserInput& input);
// Throws FormatError on a malformed body.
UserInput user_input_from_json(const nlohmann::json& j);

enum class Actor { User, Bot };

struct TranscriptEntry {
  Actor actor = Actor::User;
  nlohmann::json content;
  std::int64_t timestamp_ms = 0;
};

struct Session {
  std::string id;
  Stage stage = Stage::Idle;
  std::optional<IntentId> pending_intent;
  std::string pending_query;
  std::vector<IntentId> offered;
  std::vector<std::string> topics;
  std::optional<nlu::Prediction> last_prediction;
  std::vector<TranscriptEntry> transcript;
};

nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& transcript);

// Reply kinds accepted in `stage`, as used in protocol errors and the API.
std::vector<std::string> expected_replies(Stage stage);

// Query-independent FAQ topics: the index terms linked to the most intents,
// ties alphabetical.
std::vector<std::string> faq_topics(const keywords::KeywordIndex& index, std::size_t n);

enum class Route { Direct, Confirm, Faq };
Route route(double confidence, const EngineConfig& config);

// Shared, read-only dialogue resources plus the routing rules. All mutable
// state lives in the Session passed to each call.
class Engine {
 public:
  Engine(std::shared_ptr<const nlu::IntentModel> model, Catalog catalog, keywords::KeywordIndex index,
         EngineConfig config = {});

  const nlu::IntentModel& model() const { return *model_; }
  const Catalog& catalog() const { return catalog_; }
  const keywords::KeywordIndex& index() const { return index_; }
  const EngineConfig& config() const { return config_; }
  const std::vector<std::string>& topics() const { return topics_; }

  // Same resources, different thresholds.
  Engine with_config(EngineConfig config) const;

  BotAction handle_message(Session& session, std::string_view text) const;
  // handle_message with an already computed prediction for `text`.
  BotAction handle_predicted(Session& session, std::string_view text, const nlu::Prediction& prediction) const;
  BotAction handle_confirmation(Session& session, Confirmation reply) const;
  BotAction handle_suggestion_choice(Session& session, SuggestionChoice choice) const;
  BotAction handle_faq_navigation(Session& session, FaqNavigation nav) const;
  BotAction handle(Session& session, const UserInput& input) const;

 private:
  BotAction enter_faq(Session& session) const;
  BotAction answer(Session& session, const IntentId& intent, ActionKind kind) const;
  void record(Session& session, const UserInput& input, const BotAction& action) const;

  std::shared_ptr<const nlu::IntentModel> model_;
  Catalog catalog_;
  keywords::KeywordIndex index_;
  EngineConfig config_;
  std::vector<std::string> topics_;
};

// Runs the user inputs of `transcript` through a fresh session.
std::vector<BotAction> replay(const Engine& engine, const std::vector<TranscriptEntry>& transcript);

}  // namespace clarify::dialogue

namespace clarify::dialogue {

// Catalog plus extracted keywords, as stored next to a model.
nlohmann::json engine_assets(const Catalog& catalog, const keywords::KeywordMap& keywords);

// TF-IDF keywords from the corpus' train split, keyword index, catalog.
Engine build_engine(std::shared_ptr<const nlu::IntentModel> model, const TrainingCorpus& corpus,
                    EngineConfig config = {}, std::size_t keywords_per_intent = 5);
Engine engine_from_assets(std::shared_ptr<const nlu::IntentModel> model, const nlohmann::json& assets,
                          EngineConfig config = {});

}  // namespace clarify::dialogue
