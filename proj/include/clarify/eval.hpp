#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clarify/corpus.hpp"
#include "clarify/dialogue.hpp"
#include "clarify/nlu.hpp"
#include "json.hpp"

namespace clarify::eval {

enum class TerminalStage { Direct, Confirmation, Suggestion, Faq };
enum class Verdict { Good, Bad, Fallback };

std::string_view to_string(TerminalStage s);
std::string_view to_string(Verdict v);

struct EpisodeOutcome {
  std::string query;
  IntentId gold;
  std::optional<IntentId> delivered;
  TerminalStage terminal_stage = TerminalStage::Faq;
  Verdict verdict = Verdict::Fallback;
  IntentId predicted;
  double confidence = 0.0;
  // Bot action kinds in order, e.g. {"ConfirmPrompt", "SuggestionList", "Answer"}.
  std::vector<std::string> path;
};

Verdict verdict_for(const IntentId& gold, const std::optional<IntentId>& delivered);

// Oracle user: confirms only the gold intent, picks gold from suggestions or
// "none of the above", and gives up (nullopt) once FAQ is reached or when the
// action needs no reply.
std::optional<dialogue::UserInput> simulate_user(const IntentId& gold, const dialogue::BotAction& action);

EpisodeOutcome run_episode(const dialogue::Engine& engine, const std::string& query, const IntentId& gold);

struct Funnel {
  std::size_t direct_entered = 0;
  std::size_t direct_correct = 0;
  std::size_t confirm_entered = 0;
  std::size_t confirmed = 0;
  std::size_t suggestion_entered = 0;  // confirmation answered "no"
  std::size_t suggestion_offered = 0;  // non-empty suggestion list shown
  std::size_t suggestion_correct = 0;
  std::size_t faq_entered = 0;
  std::size_t faq_from_low_confidence = 0;

  nlohmann::json to_json() const;
};

struct IntentScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct F1Scores {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::map<IntentId, IntentScores> per_intent;
};

// micro = Good / total. macro = mean over `intents` of per-intent F1, where a
// Fallback counts as a false negative for its gold and no false positive.
F1Scores compute_f1(std::span<const EpisodeOutcome> outcomes, std::span<const IntentId> intents);

struct EvalReport {
  std::string system;
  nlohmann::json config;
  std::size_t good = 0;
  std::size_t bad = 0;
  std::size_t fallback = 0;
  std::optional<Funnel> funnel;
  F1Scores f1;
  std::vector<EpisodeOutcome> episodes;

  std::size_t total() const { return good + bad + fallback; }
  double rate(Verdict v) const;
  nlohmann::json summary() const;
};

// Intents present as gold in `queries`, in first-seen order.
std::vector<IntentId> gold_intents(std::span<const Example> queries);

EvalReport evaluate_pipeline(const dialogue::Engine& engine, std::span<const Example> test);
EvalReport evaluate_pipeline(const dialogue::Engine& engine, const TrainingCorpus& corpus);

enum class BaselineMode { Simple, Optimized };

EvalReport evaluate_baseline(const nlu::IntentModel& model, std::span<const Example> test, double threshold,
                             BaselineMode mode);
EvalReport evaluate_baseline(const nlu::IntentModel& model, const TrainingCorpus& corpus, double threshold,
                             BaselineMode mode);

// {step, 2·step, ...} strictly below 1.
std::vector<double> default_grid(double step = 0.05);

struct ScoredQuery {
  double confidence = 0.0;
  bool top_correct = false;
};

std::vector<ScoredQuery> score_queries(const nlu::IntentModel& model, std::span<const Example> queries);

// Number of queries answered correctly when answering iff confidence >= threshold.
std::size_t correct_direct_answers(std::span<const ScoredQuery> queries, double threshold);

// Grid value maximizing correct direct answers; ties go to the lowest
// threshold.
double optimize_threshold(std::span<const ScoredQuery> validation, std::span<const double> grid);
double optimize_threshold(const nlu::IntentModel& model, std::span<const Example> validation,
                          std::span<const double> grid);

// Writes comparison.{txt,tsv,json} and one episodes_<system>.tsv per report.
// Returns the written paths.
std::vector<std::filesystem::path> emit_report(std::span<const EvalReport> reports, const std::filesystem::path& dir);

// Text table: one column per report, five metric rows.
std::string comparison_table(std::span<const EvalReport> reports);

}  // namespace clarify::eval
