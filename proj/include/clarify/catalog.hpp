#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "clarify/corpus.hpp"
#include "json.hpp"

namespace clarify {

// What the dialogue engine needs to know about each intent at serving time:
// display sentence, answer text, and training volume (FAQ ordering).
class Catalog {
 public:
  struct Entry {
    IntentId intent;
    std::string canonical_form;
    std::string answer;
    std::size_t train_examples = 0;

    bool operator==(const Entry&) const = default;
  };

  Catalog() = default;
  explicit Catalog(std::vector<Entry> entries);

  static Catalog from_corpus(const TrainingCorpus& corpus);
  static Catalog from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& at(std::string_view intent) const;
  bool contains(std::string_view intent) const { return index_.count(std::string(intent)) > 0; }
  std::size_t position(std::string_view intent) const;

  bool operator==(const Catalog& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<IntentId, std::size_t> index_;
};

}  // namespace clarify
