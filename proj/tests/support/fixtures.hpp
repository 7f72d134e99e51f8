#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "clarify/corpus.hpp"
#include "clarify/dialogue.hpp"
#include "clarify/nlu.hpp"
#include "json.hpp"

namespace clarify::testing {

using Records = std::vector<std::pair<std::string, std::string>>;  // utterance, intent

inline std::string clinc_json(const Records& train, const Records& val = {}, const Records& test = {}) {
  auto arr = [](const Records& r) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [text, intent] : r) a.push_back({text, intent});
    return a;
  };
  nlohmann::ordered_json j;
  j["train"] = arr(train);
  j["val"] = arr(val);
  j["test"] = arr(test);
  j["oos_train"] = nlohmann::json::array({{"what is the weather on mars", "oos"}});
  return j.dump();
}

// Ten banking-ish intents; eight of them mention "card".
inline Records bank_train() {
  return {
      {"i lost my card", "card_lost"},           {"my card is missing", "card_lost"},
      {"card lost somewhere", "card_lost"},      {"why was my card declined", "card_declined"},
      {"card declined at store", "card_declined"}, {"declined card payment", "card_declined"},
      {"activate my new card", "card_activate"}, {"how to activate card", "card_activate"},
      {"card activation please", "card_activate"}, {"what is my card limit", "card_limit"},
      {"raise card limit", "card_limit"},        {"card spending limit", "card_limit"},
      {"card annual fee", "card_fee"},           {"fee on my card", "card_fee"},
      {"why a card fee", "card_fee"},            {"replace damaged card", "card_replace"},
      {"card replacement needed", "card_replace"}, {"replace my card", "card_replace"},
      {"change card pin", "card_pin"},           {"forgot card pin", "card_pin"},
      {"reset pin for card", "card_pin"},        {"card travel notice", "card_travel"},
      {"using card abroad travel", "card_travel"}, {"travel with my card", "card_travel"},
      {"book a flight", "book_flight"},          {"flight to paris", "book_flight"},
      {"reserve flight seats", "book_flight"},   {"transfer money to savings", "transfer"},
      {"send a transfer", "transfer"},           {"transfer funds between accounts", "transfer"},
  };
}

inline TrainingCorpus bank_corpus() { return parse_clinc_corpus(clinc_json(bank_train())); }

inline nlu::Hyperparams fast_hyperparams(int epochs = 60) {
  nlu::Hyperparams hp;
  hp.epochs = epochs;
  hp.learning_rate = 0.5;
  hp.batch_size = 4;
  return hp;
}

inline std::shared_ptr<const nlu::IntentModel> bank_model() {
  static const auto model = std::make_shared<const nlu::IntentModel>(nlu::train(bank_corpus(), fast_hyperparams()));
  return model;
}

inline dialogue::Engine bank_engine(dialogue::EngineConfig config = {}) {
  return dialogue::build_engine(bank_model(), bank_corpus(), config);
}

// Intents grouped in families sharing vocabulary, with uneven ambiguity, in
// the published dataset's layout: `train_per_intent` train utterances and
// `eval_per_intent` test-array utterances per intent.
struct SyntheticShape {
  std::size_t intents = 150;
  std::size_t family_size = 5;
  std::size_t train_per_intent = 100;
  std::size_t eval_per_intent = 40;
  std::size_t val_per_intent = 20;
  std::uint64_t seed = 7;
};

inline std::string synthetic_word(std::size_t id, const char* tag) {
  static const char* syll[] = {"ka", "lo", "mi", "ru", "te", "sa", "vo", "ne", "pi", "da", "fu", "gor"};
  std::string w = tag;
  std::size_t x = id + 1;
  while (x > 0) {
    w += syll[x % 12];
    x /= 12;
  }
  return w;
}

inline std::string synthetic_clinc_json(const SyntheticShape& shape = {}) {
  std::mt19937_64 rng(shape.seed);
  auto uni = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  const std::vector<std::string> filler = {"please", "help", "need", "want", "know", "could", "would",
                                           "find", "show", "get", "check", "tell", "like", "me"};
  auto intent_name = [&](std::size_t i) {
    return synthetic_word(i / shape.family_size, "dom") + "_" + synthetic_word(i, "task");
  };
  auto utterance = [&](std::size_t i, bool eval) {
    const auto fam = i / shape.family_size;
    std::vector<std::string> ws;
    ws.push_back(filler[uni(filler.size())]);
    if (coin(0.5)) ws.push_back(filler[uni(filler.size())]);
    const std::size_t fam_words = 1 + uni(2);
    for (std::size_t k = 0; k < fam_words; ++k) ws.push_back(synthetic_word(fam * 4 + uni(4), "fam"));
    // Harder, more ambiguous utterances in the evaluation arrays.
    const double p_sig = eval ? 0.75 : 0.9;
    if (coin(p_sig)) ws.push_back(synthetic_word(i * 6 + uni(6), "sig"));
    if (coin(eval ? 0.25 : 0.4)) ws.push_back(synthetic_word(i * 6 + uni(6), "sig"));
    // Occasional word borrowed from a sibling intent.
    if (coin(eval ? 0.3 : 0.1)) {
      const auto sib = fam * shape.family_size + uni(shape.family_size);
      if (sib < shape.intents) ws.push_back(synthetic_word(sib * 6 + uni(6), "sig"));
    }
    for (std::size_t k = ws.size(); k > 1; --k) std::swap(ws[k - 1], ws[uni(k)]);
    std::string s;
    for (const auto& w : ws) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  Records train, val, test;
  for (std::size_t i = 0; i < shape.intents; ++i) {
    const auto name = intent_name(i);
    for (std::size_t k = 0; k < shape.train_per_intent; ++k) train.emplace_back(utterance(i, false), name);
    for (std::size_t k = 0; k < shape.val_per_intent; ++k) val.emplace_back(utterance(i, true), name);
    for (std::size_t k = 0; k < shape.eval_per_intent; ++k) test.emplace_back(utterance(i, true), name);
  }
  return clinc_json(train, val, test);
}

}  // namespace clarify::testing
