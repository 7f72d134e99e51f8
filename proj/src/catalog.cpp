#include "clarify/catalog.hpp"

#include "clarify/error.hpp"

namespace clarify {

Catalog::Catalog(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].intent, i).second) {
      throw Error("duplicate catalog entry '" + entries_[i].intent + "'");
    }
  }
}

Catalog Catalog::from_corpus(const TrainingCorpus& corpus) {
  std::vector<Entry> entries;
  for (const auto& intent : corpus.intents()) {
    entries.push_back({intent, corpus.canonical_form(intent).text, corpus.answer(intent),
                       corpus.count(Split::Train, intent)});
  }
  return Catalog(std::move(entries));
}

Catalog Catalog::from_json(const nlohmann::json& j) {
  std::vector<Entry> entries;
  try {
    for (const auto& e : j.at("intents")) {
      entries.push_back({e.at("intent").get<std::string>(), e.at("canonical_form").get<std::string>(),
                         e.at("answer").get<std::string>(), e.at("train_examples").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed catalog: ") + e.what());
  }
  return Catalog(std::move(entries));
}

nlohmann::json Catalog::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries_) {
    arr.push_back({{"intent", e.intent},
                   {"canonical_form", e.canonical_form},
                   {"answer", e.answer},
                   {"train_examples", e.train_examples}});
  }
  return {{"intents", arr}};
}

const Catalog::Entry& Catalog::at(std::string_view intent) const { return entries_[position(intent)]; }

std::size_t Catalog::position(std::string_view intent) const {
  auto it = index_.find(std::string(intent));
  if (it == index_.end()) throw LookupError("unknown intent '" + std::string(intent) + "'");
  return it->second;
}

}  // namespace clarify
