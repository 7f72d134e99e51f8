#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "clarify/corpus.hpp"
#include "json.hpp"

namespace clarify::nlu {

// Namespaced feature name ("w:open", "b:open▸account", "c3:ope", ...) to
// accumulated count. Zero-valued entries are never stored.
using FeatureVector = std::map<std::string, double>;

// Lowercase word unigrams, word bigrams, and character 3- to 5-grams taken
// inside each word.
FeatureVector featurize(std::string_view text);

struct Hyperparams {
  int epochs = 200;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;

  bool operator==(const Hyperparams&) const = default;
};

nlohmann::json to_json(const Hyperparams& h);

// Encoded utterance: (feature id, count) sorted by id.
using SparseRow = std::vector<std::pair<std::uint32_t, double>>;

// Row-major over features: row f holds one weight per intent; row
// `num_features` is the bias.
struct WeightMatrix {
  std::size_t num_intents = 0;
  std::size_t num_features = 0;
  std::vector<double> data;

  WeightMatrix() = default;
  WeightMatrix(std::size_t intents, std::size_t features)
      : num_intents(intents), num_features(features), data((features + 1) * intents, 0.0) {}

  double& at(std::size_t intent, std::size_t feature) { return data[feature * num_intents + intent]; }
  double at(std::size_t intent, std::size_t feature) const { return data[feature * num_intents + intent]; }
  std::span<const double> row(std::size_t feature) const {
    return {data.data() + feature * num_intents, num_intents};
  }

  bool operator==(const WeightMatrix&) const = default;
};

struct RankedIntent {
  IntentId intent;
  double confidence = 0.0;

  bool operator==(const RankedIntent&) const = default;
};

struct Prediction {
  // Sorted by confidence descending; ties keep model intent order.
  std::vector<RankedIntent> ranked;

  const RankedIntent& top() const { return ranked.front(); }
  bool operator==(const Prediction&) const = default;
};

double confidence_of(const Prediction& prediction, std::string_view intent);

class IntentModel {
 public:
  static constexpr std::string_view kFormatTag = "clarify-intent-model/1";

  IntentModel() = default;
  // `vocabulary[i]` is the feature string with id i.
  IntentModel(std::vector<IntentId> intents, std::vector<std::string> vocabulary, WeightMatrix weights,
              Hyperparams hyperparams, std::string corpus_fingerprint);

  const std::vector<IntentId>& intents() const { return intents_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const WeightMatrix& weights() const { return weights_; }
  const Hyperparams& hyperparams() const { return hyperparams_; }
  const std::string& corpus_fingerprint() const { return fingerprint_; }

  std::optional<std::uint32_t> feature_id(std::string_view feature) const;
  std::optional<std::size_t> intent_index(std::string_view intent) const;

  // Drops out-of-vocabulary features.
  SparseRow encode(const FeatureVector& features) const;
  std::vector<double> scores(const SparseRow& row) const;

  Prediction predict(std::string_view text) const;

  bool operator==(const IntentModel& other) const;

 private:
  std::vector<IntentId> intents_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::uint32_t> feature_ids_;
  std::unordered_map<std::string, std::size_t> intent_ids_;
  WeightMatrix weights_;
  Hyperparams hyperparams_;
  std::string fingerprint_;
};

inline Prediction predict(const IntentModel& model, std::string_view text) { return model.predict(text); }

// Numerically stable in-place softmax.
void softmax(std::span<double> values);

struct LabeledRow {
  SparseRow features;
  std::size_t label = 0;
};

// Mean softmax cross-entropy over `batch` plus (l2/2)·‖W‖² over non-bias
// weights. Writes the dense gradient into `gradient` when non-null.
double objective(const WeightMatrix& weights, std::span<const LabeledRow> batch, double l2,
                 WeightMatrix* gradient);

// Minibatch gradient descent. Decay is kept as a global scale on the
// non-bias weights so a step touches only the active features.
class Trainer {
 public:
  Trainer(std::size_t num_intents, std::size_t num_features, double learning_rate, double l2);
  explicit Trainer(const WeightMatrix& initial, double learning_rate, double l2);

  void step(std::span<const LabeledRow> batch);
  WeightMatrix weights() const;

 private:
  void scores(const SparseRow& row, std::span<double> out) const;

  std::size_t num_intents_;
  std::size_t num_features_;
  double learning_rate_;
  double l2_;
  double scale_ = 1.0;
  std::vector<double> unscaled_;  // num_features × num_intents
  std::vector<double> bias_;
  std::vector<std::int64_t> slot_;
  std::vector<std::uint32_t> active_;
  std::vector<double> grad_;
  std::vector<double> grad_bias_;
};

// Builds the vocabulary from all train examples and fits the model.
IntentModel train(const TrainingCorpus& corpus, const Hyperparams& hyperparams = {});

// Binary model file: magic, JSON header (format tag, intents, vocabulary,
// hyperparameters, corpus fingerprint, caller-supplied `extra`), then the
// weight matrix as little-endian doubles.
void save_model(const IntentModel& model, const std::filesystem::path& path,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  IntentModel model;
  nlohmann::json extra;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace clarify::nlu
