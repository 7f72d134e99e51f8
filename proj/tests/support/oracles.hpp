#pragma once

// Independent reference implementations, kept deliberately naive.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clarify/corpus.hpp"
#include "clarify/eval.hpp"
#include "clarify/keywords.hpp"
#include "clarify/nlu.hpp"
#include "clarify/text.hpp"
#include "support/fixtures.hpp"

namespace clarify::testing {

// TF-IDF straight from the definition, by linear scans.
inline double brute_tfidf(const TrainingCorpus& corpus, const IntentId& intent, const std::string& term) {
  std::map<IntentId, std::vector<std::string>> docs;
  for (const auto& i : corpus.intents()) docs[i];
  for (const auto& ex : corpus.examples()) {
    if (ex.split != Split::Train) continue;
    for (const auto& w : text::words(ex.text)) {
      if (w.size() >= 2 && !keywords::is_stop_word(w)) docs[ex.intent].push_back(w);
    }
  }
  double tf = 0;
  for (const auto& w : docs[intent]) tf += w == term;
  double df = 0;
  for (const auto& [i, doc] : docs) df += std::find(doc.begin(), doc.end(), term) != doc.end();
  if (df == 0) return 0.0;
  return tf * std::log(static_cast<double>(docs.size()) / df);
}

inline const std::vector<std::string>& small_vocab() {
  static const std::vector<std::string> v = {"card", "loan", "fee", "pin", "the", "travel", "rate", "a", "oil", "flight"};
  return v;
}

// 1 to 5 intents, 1 to 4 short utterances each.
inline TrainingCorpus random_small_corpus(std::mt19937_64& rng) {
  const auto& vocab = small_vocab();
  Records recs;
  const std::size_t n_intents = 1 + rng() % 5;
  for (std::size_t i = 0; i < n_intents; ++i) {
    const std::size_t n_ex = 1 + rng() % 4;
    for (std::size_t e = 0; e < n_ex; ++e) {
      std::string s = "u" + std::to_string(e);
      for (std::size_t w = 0, len = 1 + rng() % 6; w < len; ++w) s += " " + vocab[rng() % vocab.size()];
      recs.emplace_back(s, "intent" + std::to_string(i));
    }
  }
  return parse_clinc_corpus(clinc_json(recs));
}

// Largest |table - brute| over every (intent, vocabulary or table term).
inline double tfidf_max_error(const TrainingCorpus& corpus) {
  const auto table = keywords::compute_tfidf(corpus);
  double worst = 0.0;
  for (const auto& intent : corpus.intents()) {
    for (const auto& term : small_vocab())
      worst = std::max(worst, std::abs(table.score(intent, term) - brute_tfidf(corpus, intent, term)));
    for (const auto& [term, score] : table.scores.at(intent))
      worst = std::max(worst, std::abs(score - brute_tfidf(corpus, intent, term)));
  }
  return worst;
}

// Every intent sharing an index term with the query, minus `exclude`, fully
// sorted by (confidence desc, model order), cut to `max`.
inline std::vector<IntentId> suggestion_oracle(const keywords::KeywordIndex& index, const nlu::IntentModel& model,
                                               const std::string& query, const std::set<IntentId>& exclude,
                                               std::size_t max = 6) {
  const auto prediction = model.predict(query);
  std::vector<std::pair<double, std::size_t>> cands;
  const auto words = text::words(query);
  for (std::size_t i = 0; i < model.intents().size(); ++i) {
    const auto& intent = model.intents()[i];
    bool linked = false;
    for (const auto& w : words) linked = linked || index.linked(w).count(intent) > 0;
    if (linked && !exclude.count(intent)) cands.emplace_back(nlu::confidence_of(prediction, intent), i);
  }
  std::sort(cands.begin(), cands.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  if (cands.size() > max) cands.resize(max);
  std::vector<IntentId> out;
  for (const auto& c : cands) out.push_back(model.intents()[c.second]);
  return out;
}

inline double threshold_oracle(std::span<const eval::ScoredQuery> qs, std::span<const double> grid) {
  std::size_t best_count = 0;
  double best = 2.0;
  for (double t : grid) {
    std::size_t c = 0;
    for (const auto& q : qs) c += (q.top_correct && q.confidence >= t);
    if (c > best_count || (c == best_count && t < best)) {
      best_count = c;
      best = t;
    }
  }
  return best;
}

inline std::vector<eval::ScoredQuery> random_scored_queries(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<eval::ScoredQuery> qs(1 + rng() % 20);
  for (auto& q : qs) q = {std::round(u(rng) * 20) / 20, u(rng) < 0.6};
  return qs;
}

inline std::vector<double> random_grid(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> grid;
  for (std::size_t i = 0, n = 1 + rng() % 10; i < n; ++i) grid.push_back(std::round(u(rng) * 20) / 20);
  return grid;
}

// 3 intents, 6 examples, random weights.
struct GradientToy {
  nlu::WeightMatrix weights{3, 5};
  std::vector<nlu::LabeledRow> batch;

  GradientToy() {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.7);
    for (double& w : weights.data) w = n(rng);
    batch = {{{{0, 1}, {1, 2}}, 0}, {{{1, 1}}, 0}, {{{2, 1}, {3, 1}, {4, 3}}, 1},
             {{{2, 2}}, 1},         {{{3, 1}, {4, 1}}, 2}, {{{0, 1}, {4, 2}}, 2}};
  }
};

// Relative error of the analytic gradient against central differences, per weight.
inline std::vector<double> gradient_rel_errors(const GradientToy& toy, double l2 = 0.01, double h = 1e-5) {
  nlu::WeightMatrix grad;
  nlu::objective(toy.weights, toy.batch, l2, &grad);
  std::vector<double> out;
  for (std::size_t i = 0; i < toy.weights.data.size(); ++i) {
    auto plus = toy.weights, minus = toy.weights;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double numeric =
        (nlu::objective(plus, toy.batch, l2, nullptr) - nlu::objective(minus, toy.batch, l2, nullptr)) / (2 * h);
    const double analytic = grad.data[i];
    out.push_back(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
  }
  return out;
}

}  // namespace clarify::testing
