#include "clarify/keywords.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "clarify/error.hpp"
#include "clarify/text.hpp"

namespace clarify::keywords {

namespace {

// NLTK English stop-word list, ASCII apostrophes dropped to match the word
// tokenizer.
constexpr std::array<std::string_view, 127> kStopWords = {
    "i",       "me",     "my",    "myself", "we",     "our",     "ours",   "ourselves", "you",   "your",
    "yours",   "yourself", "yourselves", "he", "him",  "his",     "himself", "she",     "her",   "hers",
    "herself", "it",     "its",   "itself", "they",   "them",    "their",  "theirs",   "themselves",
    "what",    "which",  "who",   "whom",   "this",   "that",    "these",  "those",    "am",    "is",
    "are",     "was",    "were",  "be",     "been",   "being",   "have",   "has",      "had",   "having",
    "do",      "does",   "did",   "doing",  "a",      "an",      "the",    "and",      "but",   "if",
    "or",      "because", "as",   "until",  "while",  "of",      "at",     "by",       "for",   "with",
    "about",   "against", "between", "into", "through", "during", "before", "after",   "above", "below",
    "to",      "from",   "up",    "down",   "in",     "out",     "on",     "off",      "over",  "under",
    "again",   "further", "then", "once",   "here",   "there",   "when",   "where",    "why",   "how",
    "all",     "any",    "both",  "each",   "few",    "more",    "most",   "other",    "some",  "such",
    "no",      "nor",    "not",   "only",   "own",    "same",    "so",     "than",     "too",   "very",
    "can",     "will",   "just",  "don",    "should", "now",     "s",      "t"};

}  // namespace

std::span<const std::string_view> stop_words() { return kStopWords; }

bool is_stop_word(std::string_view word) {
  return std::find(kStopWords.begin(), kStopWords.end(), word) != kStopWords.end();
}

std::vector<std::string> terms(std::string_view text) {
  auto ws = text::words(text);
  std::erase_if(ws, [](const std::string& w) { return w.size() < 2 || is_stop_word(w); });
  return ws;
}

double TfidfTable::idf(const std::string& term) const {
  auto it = df.find(term);
  if (it == df.end()) return 0.0;
  return std::log(static_cast<double>(intents.size()) / static_cast<double>(it->second));
}

double TfidfTable::score(const IntentId& intent, const std::string& term) const {
  auto it = scores.find(intent);
  if (it == scores.end()) return 0.0;
  auto jt = it->second.find(term);
  return jt == it->second.end() ? 0.0 : jt->second;
}

TfidfTable compute_tfidf(const TrainingCorpus& corpus) {
  if (corpus.intents().empty()) throw EmptyCorpusError("TF-IDF needs a non-empty corpus");
  TfidfTable table;
  table.intents = corpus.intents();
  std::map<IntentId, std::map<std::string, double>> tf;
  for (const auto& intent : table.intents) tf[intent];
  for (const auto& ex : corpus.examples()) {
    if (ex.split != Split::Train) continue;
    for (const auto& t : terms(ex.text)) tf[ex.intent][t] += 1.0;
  }
  for (const auto& [intent, counts] : tf) {
    for (const auto& [term, c] : counts) ++table.df[term];
  }
  for (const auto& [intent, counts] : tf) {
    auto& row = table.scores[intent];
    for (const auto& [term, c] : counts) row[term] = c * table.idf(term);
  }
  return table;
}

KeywordMap extract_keywords(const TfidfTable& table, std::size_t k) {
  KeywordMap out;
  for (const auto& intent : table.intents) {
    std::vector<Keyword> cands;
    auto it = table.scores.find(intent);
    if (it != table.scores.end()) {
      for (const auto& [term, score] : it->second) {
        if (score > 0.0) cands.push_back({term, score});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Keyword& a, const Keyword& b) {
      return a.score != b.score ? a.score > b.score : a.term < b.term;
    });
    if (cands.size() > k) cands.resize(k);
    out[intent] = std::move(cands);
  }
  return out;
}

nlohmann::json to_json(const KeywordMap& keywords) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [intent, list] : keywords) {
    auto& arr = j[intent] = nlohmann::json::array();
    for (const auto& kw : list) arr.push_back({kw.term, kw.score});
  }
  return j;
}

KeywordMap keywords_from_json(const nlohmann::json& j) {
  KeywordMap out;
  try {
    for (const auto& [intent, arr] : j.items()) {
      auto& list = out[intent];
      for (const auto& e : arr) list.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed keyword table: ") + e.what());
  }
  return out;
}

KeywordIndex::KeywordIndex(std::map<IntentId, std::vector<std::string>> keywords_of,
                           std::map<std::string, std::set<IntentId>> intents_of)
    : keywords_of_(std::move(keywords_of)), intents_of_(std::move(intents_of)) {}

const std::set<IntentId>& KeywordIndex::linked(const std::string& term) const {
  static const std::set<IntentId> kNone;
  auto it = intents_of_.find(term);
  return it == intents_of_.end() ? kNone : it->second;
}

KeywordIndex build_keyword_index(const KeywordMap& keywords, const Catalog& catalog) {
  std::map<IntentId, std::vector<std::string>> keywords_of;
  std::map<std::string, std::set<IntentId>> intents_of;
  for (const auto& [intent, list] : keywords) {
    auto& terms_of = keywords_of[intent];
    for (const auto& kw : list) {
      terms_of.push_back(kw.term);
      intents_of[kw.term].insert(intent);
    }
  }
  for (const auto& entry : catalog.entries()) {
    for (const auto& w : text::words(entry.canonical_form)) {
      auto it = intents_of.find(w);
      if (it != intents_of.end()) it->second.insert(entry.intent);
    }
  }
  return KeywordIndex(std::move(keywords_of), std::move(intents_of));
}

std::vector<Suggestion> suggest(const KeywordIndex& index, const Catalog& catalog, const nlu::Prediction& prediction,
                                std::string_view text, const std::set<IntentId>& exclude, std::size_t max) {
  std::set<IntentId> candidates;
  for (const auto& w : text::words(text)) {
    for (const auto& intent : index.linked(w)) {
      if (!exclude.count(intent)) candidates.insert(intent);
    }
  }
  std::vector<Suggestion> out;
  // The prediction is already ordered by confidence, ties in model order.
  for (const auto& r : prediction.ranked) {
    if (out.size() >= max) break;
    if (candidates.count(r.intent)) out.push_back({r.intent, catalog.at(r.intent).canonical_form, r.confidence});
  }
  return out;
}

std::vector<Suggestion> suggest(const KeywordIndex& index, const Catalog& catalog, const nlu::IntentModel& model,
                                std::string_view text, const std::set<IntentId>& exclude, std::size_t max) {
  return suggest(index, catalog, model.predict(text), text, exclude, max);
}

}  // namespace clarify::keywords
