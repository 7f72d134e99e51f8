#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace clarify {

using IntentId = std::string;

// `Held` marks loaded evaluation formulations that no split has selected yet.
enum class Split { Train, Validation, Test, Held };

std::string_view to_string(Split s);

struct Example {
  std::string text;
  IntentId intent;
  Split split = Split::Train;
  // Name of the array the record came from in the source file ("train",
  // "val", "test", ...).
  std::string origin;

  bool operator==(const Example&) const = default;
};

struct CanonicalForm {
  IntentId intent;
  std::string text;

  bool operator==(const CanonicalForm&) const = default;
};

// Immutable once built; share freely between readers.
class TrainingCorpus {
 public:
  TrainingCorpus() = default;

  // Validates the corpus invariants and throws on violation.
  TrainingCorpus(std::vector<IntentId> intents, std::vector<Example> examples,
                 std::map<IntentId, CanonicalForm> canonical_forms,
                 std::map<IntentId, std::string> answers);

  const std::vector<IntentId>& intents() const { return intents_; }
  const std::vector<Example>& examples() const { return examples_; }
  const std::map<IntentId, CanonicalForm>& canonical_forms() const { return canonical_forms_; }
  const std::map<IntentId, std::string>& answers() const { return answers_; }

  bool has_intent(std::string_view intent) const;
  const CanonicalForm& canonical_form(std::string_view intent) const;
  const std::string& answer(std::string_view intent) const;

  std::vector<Example> examples_in(Split split) const;
  std::size_t count(Split split) const;
  std::size_t count(Split split, std::string_view intent) const;

  // Stable digest of intents, examples, split tags, and canonical forms.
  std::string fingerprint() const;

  // Counts per split and per-intent train counts.
  nlohmann::json summary() const;

  bool operator==(const TrainingCorpus&) const = default;

 private:
  std::vector<IntentId> intents_;
  std::vector<Example> examples_;
  std::map<IntentId, CanonicalForm> canonical_forms_;
  std::map<IntentId, std::string> answers_;
};

// Loads the in-scope portion of a CLINC150-style file: an object whose
// members are arrays of [utterance, label] pairs. Members named "oos_*" and
// records labelled "oos" are ignored. "train" records become Split::Train,
// everything else Split::Held. Intents keep their first-appearance order.
TrainingCorpus load_clinc_corpus(const std::filesystem::path& path,
                                 const std::filesystem::path& canonical_sidecar = {});
TrainingCorpus parse_clinc_corpus(std::string_view json_text,
                                  const std::map<IntentId, std::string>& overrides = {});

// Tags the first `n_test` then next `n_val` formulations from the source
// "test" array of each of the first `n_intents` intents. Train examples are
// untouched; other previously selected examples go back to Held.
TrainingCorpus apply_eval_split(const TrainingCorpus& corpus, std::size_t n_intents = 30,
                                 std::size_t n_test = 10, std::size_t n_val = 20);

// "I understand that you want to talk about <name>, is that correct?"
CanonicalForm generate_canonical_form(const IntentId& intent);

// Sidecar override of canonical forms: one "intent<TAB>sentence" per line.
std::map<IntentId, std::string> read_canonical_sidecar(const std::filesystem::path& path);

bool is_single_sentence(std::string_view text);

std::string placeholder_answer(const IntentId& intent);

}  // namespace clarify
