#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clarify/catalog.hpp"
#include "clarify/corpus.hpp"
#include "clarify/nlu.hpp"

namespace clarify::keywords {

bool is_stop_word(std::string_view word);
std::span<const std::string_view> stop_words();

// Word tokens used for TF-IDF: featurizer words minus stop words and
// single-character tokens.
std::vector<std::string> terms(std::string_view text);

// One document per intent (its concatenated train examples).
// tf = raw count, idf = ln(N / df), score = tf·idf.
struct TfidfTable {
  std::vector<IntentId> intents;
  std::map<IntentId, std::map<std::string, double>> scores;
  std::map<std::string, std::size_t> df;

  double idf(const std::string& term) const;
  double score(const IntentId& intent, const std::string& term) const;
};

TfidfTable compute_tfidf(const TrainingCorpus& corpus);

struct Keyword {
  std::string term;
  double score = 0.0;

  bool operator==(const Keyword&) const = default;
};

using KeywordMap = std::map<IntentId, std::vector<Keyword>>;

// Top-k positive-score terms per intent; ties broken lexicographically.
KeywordMap extract_keywords(const TfidfTable& table, std::size_t k = 5);

nlohmann::json to_json(const KeywordMap& keywords);
KeywordMap keywords_from_json(const nlohmann::json& j);

class KeywordIndex {
 public:
  KeywordIndex() = default;
  KeywordIndex(std::map<IntentId, std::vector<std::string>> keywords_of,
               std::map<std::string, std::set<IntentId>> intents_of);

  const std::map<IntentId, std::vector<std::string>>& keywords_of() const { return keywords_of_; }
  const std::map<std::string, std::set<IntentId>>& intents_of() const { return intents_of_; }
  const std::set<IntentId>& linked(const std::string& term) const;
  bool empty() const { return intents_of_.empty(); }

 private:
  std::map<IntentId, std::vector<std::string>> keywords_of_;
  std::map<std::string, std::set<IntentId>> intents_of_;
};

// Links each extracted term to the intents that extracted it and to every
// intent whose canonical form contains it as a whole word.
KeywordIndex build_keyword_index(const KeywordMap& keywords, const Catalog& catalog);

struct Suggestion {
  IntentId intent;
  std::string canonical_form;
  double confidence = 0.0;
};

// Intents linked to any index term present in `text`, minus `exclude`,
// ordered by classifier confidence (ties by model intent order), truncated.
std::vector<Suggestion> suggest(const KeywordIndex& index, const Catalog& catalog, const nlu::Prediction& prediction,
                                std::string_view text, const std::set<IntentId>& exclude, std::size_t max = 6);
std::vector<Suggestion> suggest(const KeywordIndex& index, const Catalog& catalog, const nlu::IntentModel& model,
                                std::string_view text, const std::set<IntentId>& exclude, std::size_t max = 6);

}  // namespace clarify::keywords
