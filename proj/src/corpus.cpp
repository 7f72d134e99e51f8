#include "clarify/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "clarify/error.hpp"
#include "clarify/text.hpp"

namespace clarify {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::Held: return "held";
  }
  return "unknown";
}

TrainingCorpus::TrainingCorpus(std::vector<IntentId> intents, std::vector<Example> examples,
                               std::map<IntentId, CanonicalForm> canonical_forms,
                               std::map<IntentId, std::string> answers)
    : intents_(std::move(intents)),
      examples_(std::move(examples)),
      canonical_forms_(std::move(canonical_forms)),
      answers_(std::move(answers)) {
  std::set<IntentId> known;
  for (const auto& intent : intents_) {
    if (intent.empty()) throw Error("intent name must be non-empty");
    if (!known.insert(intent).second) throw Error("duplicate intent '" + intent + "'");
  }
  std::map<IntentId, std::size_t> train_counts;
  std::set<std::tuple<Split, std::string, IntentId>> seen;
  for (const auto& ex : examples_) {
    if (text::trim(ex.text).empty()) throw Error("empty utterance for intent '" + ex.intent + "'");
    if (!known.count(ex.intent)) throw Error("example refers to unknown intent '" + ex.intent + "'");
    if (ex.split == Split::Train) ++train_counts[ex.intent];
    if (ex.split != Split::Held && !seen.emplace(ex.split, ex.text, ex.intent).second) {
      throw Error("duplicate example '" + ex.text + "' for intent '" + ex.intent + "' in split " +
                  std::string(to_string(ex.split)));
    }
  }
  for (const auto& intent : intents_) {
    if (!train_counts.count(intent)) throw Error("intent '" + intent + "' has no train example");
    auto cf = canonical_forms_.find(intent);
    if (cf == canonical_forms_.end()) throw Error("intent '" + intent + "' has no canonical form");
    if (cf->second.intent != intent || text::trim(cf->second.text).empty() ||
        !is_single_sentence(cf->second.text)) {
      throw Error("invalid canonical form for intent '" + intent + "'");
    }
    if (!answers_.count(intent)) throw Error("intent '" + intent + "' has no answer");
  }
  if (canonical_forms_.size() != intents_.size() || answers_.size() != intents_.size()) {
    throw Error("canonical forms or answers reference unknown intents");
  }
}

bool TrainingCorpus::has_intent(std::string_view intent) const {
  return canonical_forms_.count(std::string(intent)) > 0;
}

const CanonicalForm& TrainingCorpus::canonical_form(std::string_view intent) const {
  auto it = canonical_forms_.find(std::string(intent));
  if (it == canonical_forms_.end()) throw LookupError("unknown intent '" + std::string(intent) + "'");
  return it->second;
}

const std::string& TrainingCorpus::answer(std::string_view intent) const {
  auto it = answers_.find(std::string(intent));
  if (it == answers_.end()) throw LookupError("unknown intent '" + std::string(intent) + "'");
  return it->second;
}

std::vector<Example> TrainingCorpus::examples_in(Split split) const {
  std::vector<Example> out;
  for (const auto& ex : examples_) {
    if (ex.split == split) out.push_back(ex);
  }
  return out;
}

std::size_t TrainingCorpus::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      examples_.begin(), examples_.end(), [&](const Example& e) { return e.split == split; }));
}

std::size_t TrainingCorpus::count(Split split, std::string_view intent) const {
  return static_cast<std::size_t>(std::count_if(examples_.begin(), examples_.end(), [&](const Example& e) {
    return e.split == split && e.intent == intent;
  }));
}

std::string TrainingCorpus::fingerprint() const {
  text::Fingerprint fp;
  fp.add_u64(intents_.size());
  for (const auto& intent : intents_) {
    fp.add(intent);
    fp.add(canonical_forms_.at(intent).text);
    fp.add(answers_.at(intent));
  }
  fp.add_u64(examples_.size());
  for (const auto& ex : examples_) {
    fp.add(ex.text);
    fp.add(ex.intent);
    fp.add(to_string(ex.split));
    fp.add(ex.origin);
  }
  return fp.hex();
}

nlohmann::json TrainingCorpus::summary() const {
  nlohmann::json j;
  j["intents"] = intents_.size();
  j["intent_order"] = "first appearance in source file";
  for (auto s : {Split::Train, Split::Validation, Split::Test, Split::Held}) {
    j["examples"][std::string(to_string(s))] = count(s);
  }
  std::vector<IntentId> test_intents;
  for (const auto& intent : intents_) {
    if (count(Split::Test, intent) > 0) test_intents.push_back(intent);
  }
  j["test_intents"] = test_intents;
  j["fingerprint"] = fingerprint();
  return j;
}

namespace {

std::string record_location(const std::string& member, std::size_t index) {
  return member + "[" + std::to_string(index) + "]";
}

}  // namespace

TrainingCorpus parse_clinc_corpus(std::string_view json_text,
                                  const std::map<IntentId, std::string>& overrides) {
  // ordered_json keeps members in document order, which defines intent order.
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(json_text);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw ParseError(std::string("dataset is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("dataset root must be an object of named splits");

  std::vector<IntentId> intents;
  std::set<IntentId> known;
  std::vector<Example> examples;
  std::set<std::tuple<std::string, std::string, IntentId>> seen;

  std::vector<std::string> members;
  for (const auto& [key, value] : root.items()) members.push_back(key);

  for (const auto& member : members) {
    if (member.rfind("oos", 0) == 0) continue;
    const auto& records = root.at(member);
    if (!records.is_array()) throw ParseError("member '" + member + "' must be an array of records");
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& rec = records[i];
      if (!rec.is_array() || rec.size() != 2 || !rec[0].is_string() || !rec[1].is_string()) {
        throw ParseError("malformed record " + record_location(member, i) +
                         ": expected [utterance, intent-label]");
      }
      const auto utterance = text::trim(rec[0].get<std::string>());
      const auto label = text::trim(rec[1].get<std::string>());
      if (utterance.empty() || label.empty()) {
        throw ParseError("malformed record " + record_location(member, i) + ": empty utterance or label");
      }
      if (label == "oos") continue;
      if (!seen.emplace(member, utterance, label).second) continue;
      if (known.insert(label).second) intents.push_back(label);
      examples.push_back({utterance, label, member == "train" ? Split::Train : Split::Held, member});
    }
  }
  if (intents.empty()) throw EmptyCorpusError("dataset contains no in-scope records");

  std::map<IntentId, CanonicalForm> forms;
  std::map<IntentId, std::string> answers;
  for (const auto& intent : intents) {
    auto ov = overrides.find(intent);
    forms[intent] = ov != overrides.end() ? CanonicalForm{intent, ov->second} : generate_canonical_form(intent);
    answers[intent] = placeholder_answer(intent);
  }
  return TrainingCorpus(std::move(intents), std::move(examples), std::move(forms), std::move(answers));
}

TrainingCorpus load_clinc_corpus(const std::filesystem::path& path,
                                 const std::filesystem::path& canonical_sidecar) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::map<IntentId, std::string> overrides;
  if (!canonical_sidecar.empty()) overrides = read_canonical_sidecar(canonical_sidecar);
  return parse_clinc_corpus(buf.str(), overrides);
}

TrainingCorpus apply_eval_split(const TrainingCorpus& corpus, std::size_t n_intents, std::size_t n_test,
                                 std::size_t n_val) {
  const auto& intents = corpus.intents();
  if (n_intents > intents.size()) {
    throw SplitError("requested " + std::to_string(n_intents) + " intents but corpus has " +
                     std::to_string(intents.size()));
  }
  std::set<std::pair<std::string, IntentId>> train_pairs;
  for (const auto& ex : corpus.examples()) {
    if (ex.split == Split::Train) train_pairs.emplace(ex.text, ex.intent);
  }

  std::vector<Example> examples = corpus.examples();
  for (auto& ex : examples) {
    if (ex.split != Split::Train) ex.split = Split::Held;
  }
  for (std::size_t k = 0; k < n_intents; ++k) {
    const auto& intent = intents[k];
    std::vector<Example*> pool;
    for (auto& ex : examples) {
      if (ex.intent == intent && ex.origin == "test" && !train_pairs.count({ex.text, ex.intent})) {
        pool.push_back(&ex);
      }
    }
    if (pool.size() < n_test + n_val) {
      throw SplitError("intent '" + intent + "' has " + std::to_string(pool.size()) +
                       " evaluation formulations, needs " + std::to_string(n_test + n_val));
    }
    for (std::size_t i = 0; i < n_test; ++i) pool[i]->split = Split::Test;
    for (std::size_t i = n_test; i < n_test + n_val; ++i) pool[i]->split = Split::Validation;
  }
  return TrainingCorpus(intents, std::move(examples), corpus.canonical_forms(), corpus.answers());
}

CanonicalForm generate_canonical_form(const IntentId& intent) {
  std::string name = intent;
  std::replace(name.begin(), name.end(), '_', ' ');
  return {intent, "I understand that you want to talk about " + name + ", is that correct?"};
}

std::map<IntentId, std::string> read_canonical_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open canonical form file '" + path.string() + "'");
  std::map<IntentId, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected intent<TAB>sentence");
    }
    auto intent = text::trim(line.substr(0, tab));
    auto sentence = text::trim(line.substr(tab + 1));
    if (intent.empty() || sentence.empty() || !is_single_sentence(sentence)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": canonical form must be one sentence");
    }
    out[intent] = sentence;
  }
  return out;
}

bool is_single_sentence(std::string_view s) {
  const auto t = text::trim(s);
  if (t.empty()) return false;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (t[i] != '.' && t[i] != '!' && t[i] != '?') continue;
    std::size_t j = i + 1;
    while (j < t.size() && (t[j] == '.' || t[j] == '!' || t[j] == '?')) ++j;
    if (j < t.size() && (t[j] == ' ' || t[j] == '\t' || t[j] == '\n')) return false;
  }
  return true;
}

std::string placeholder_answer(const IntentId& intent) { return "ANSWER(" + intent + ")"; }

}  // namespace clarify
