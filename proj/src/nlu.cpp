#include "clarify/nlu.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "clarify/error.hpp"
#include "clarify/text.hpp"

namespace clarify::nlu {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'L', 'R', 'F', 'Y', 'M', 'D', 'L'};
constexpr std::string_view kBigramJoin = "\xe2\x96\xb8";  // ▸

}  // namespace

FeatureVector featurize(std::string_view text) {
  FeatureVector out;
  const auto tokens = text::words(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& w = tokens[i];
    out["w:" + w] += 1.0;
    if (i + 1 < tokens.size()) out["b:" + w + std::string(kBigramJoin) + tokens[i + 1]] += 1.0;
    for (std::size_t n = 3; n <= 5; ++n) {
      if (w.size() < n) break;
      const std::string prefix = "c" + std::to_string(n) + ":";
      for (std::size_t k = 0; k + n <= w.size(); ++k) out[prefix + w.substr(k, n)] += 1.0;
    }
  }
  return out;
}

nlohmann::json to_json(const Hyperparams& h) {
  return {{"epochs", h.epochs},
          {"learning_rate", h.learning_rate},
          {"l2", h.l2},
          {"batch_size", h.batch_size},
          {"seed", h.seed}};
}

double confidence_of(const Prediction& prediction, std::string_view intent) {
  for (const auto& r : prediction.ranked) {
    if (r.intent == intent) return r.confidence;
  }
  throw LookupError("intent '" + std::string(intent) + "' is not in the prediction");
}

void softmax(std::span<double> values) {
  if (values.empty()) return;
  const double m = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double& v : values) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : values) v /= sum;
}

IntentModel::IntentModel(std::vector<IntentId> intents, std::vector<std::string> vocabulary, WeightMatrix weights,
                         Hyperparams hyperparams, std::string corpus_fingerprint)
    : intents_(std::move(intents)),
      vocabulary_(std::move(vocabulary)),
      weights_(std::move(weights)),
      hyperparams_(hyperparams),
      fingerprint_(std::move(corpus_fingerprint)) {
  if (intents_.empty()) throw TrainingError("model needs at least one intent");
  if (weights_.num_intents != intents_.size() || weights_.num_features != vocabulary_.size() ||
      weights_.data.size() != (vocabulary_.size() + 1) * intents_.size()) {
    throw FormatError("weight matrix dimensions do not match intents × (vocabulary + 1)");
  }
  for (double w : weights_.data) {
    if (!std::isfinite(w)) throw FormatError("model contains non-finite weights");
  }
  for (std::uint32_t i = 0; i < vocabulary_.size(); ++i) {
    if (!feature_ids_.emplace(vocabulary_[i], i).second) throw FormatError("duplicate vocabulary entry");
  }
  for (std::size_t i = 0; i < intents_.size(); ++i) {
    if (!intent_ids_.emplace(intents_[i], i).second) throw FormatError("duplicate intent in model");
  }
}

std::optional<std::uint32_t> IntentModel::feature_id(std::string_view feature) const {
  auto it = feature_ids_.find(std::string(feature));
  if (it == feature_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> IntentModel::intent_index(std::string_view intent) const {
  auto it = intent_ids_.find(std::string(intent));
  if (it == intent_ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

SparseRow encode_with(const std::unordered_map<std::string, std::uint32_t>& ids, const FeatureVector& features) {
  SparseRow row;
  for (const auto& [name, value] : features) {
    auto it = ids.find(name);
    if (it == ids.end() || value == 0.0) continue;
    row.emplace_back(it->second, value);
  }
  std::sort(row.begin(), row.end());
  return row;
}

}  // namespace

SparseRow IntentModel::encode(const FeatureVector& features) const { return encode_with(feature_ids_, features); }

std::vector<double> IntentModel::scores(const SparseRow& row) const {
  const auto k = intents_.size();
  const auto bias = weights_.row(weights_.num_features);
  std::vector<double> out(bias.begin(), bias.end());
  for (const auto& [f, v] : row) {
    const auto w = weights_.row(f);
    for (std::size_t c = 0; c < k; ++c) out[c] += w[c] * v;
  }
  return out;
}

Prediction IntentModel::predict(std::string_view text) const {
  auto s = scores(encode(featurize(text)));
  softmax(s);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  Prediction p;
  p.ranked.reserve(order.size());
  for (auto i : order) p.ranked.push_back({intents_[i], s[i]});
  return p;
}

bool IntentModel::operator==(const IntentModel& other) const {
  return intents_ == other.intents_ && vocabulary_ == other.vocabulary_ && weights_ == other.weights_ &&
         hyperparams_ == other.hyperparams_ && fingerprint_ == other.fingerprint_;
}

double objective(const WeightMatrix& weights, std::span<const LabeledRow> batch, double l2, WeightMatrix* gradient) {
  const auto k = weights.num_intents;
  if (gradient) *gradient = WeightMatrix(k, weights.num_features);
  const double inv_b = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> s(k);
  for (const auto& ex : batch) {
    const auto bias = weights.row(weights.num_features);
    std::copy(bias.begin(), bias.end(), s.begin());
    for (const auto& [f, v] : ex.features) {
      const auto w = weights.row(f);
      for (std::size_t c = 0; c < k; ++c) s[c] += w[c] * v;
    }
    softmax(s);
    loss -= std::log(std::max(s[ex.label], 1e-300)) * inv_b;
    if (!gradient) continue;
    s[ex.label] -= 1.0;
    for (const auto& [f, v] : ex.features) {
      for (std::size_t c = 0; c < k; ++c) gradient->at(c, f) += s[c] * v * inv_b;
    }
    for (std::size_t c = 0; c < k; ++c) gradient->at(c, weights.num_features) += s[c] * inv_b;
  }
  const std::size_t n_reg = weights.num_features * k;
  for (std::size_t i = 0; i < n_reg; ++i) {
    loss += 0.5 * l2 * weights.data[i] * weights.data[i];
    if (gradient) gradient->data[i] += l2 * weights.data[i];
  }
  return loss;
}

Trainer::Trainer(std::size_t num_intents, std::size_t num_features, double learning_rate, double l2)
    : Trainer(WeightMatrix(num_intents, num_features), learning_rate, l2) {}

Trainer::Trainer(const WeightMatrix& initial, double learning_rate, double l2)
    : num_intents_(initial.num_intents),
      num_features_(initial.num_features),
      learning_rate_(learning_rate),
      l2_(l2),
      unscaled_(initial.data.begin(), initial.data.begin() + initial.num_features * initial.num_intents),
      bias_(initial.data.begin() + initial.num_features * initial.num_intents, initial.data.end()),
      slot_(initial.num_features, -1) {}

void Trainer::scores(const SparseRow& row, std::span<double> out) const {
  std::copy(bias_.begin(), bias_.end(), out.begin());
  for (const auto& [f, v] : row) {
    const double* w = unscaled_.data() + static_cast<std::size_t>(f) * num_intents_;
    const double sv = scale_ * v;
    for (std::size_t c = 0; c < num_intents_; ++c) out[c] += w[c] * sv;
  }
}

void Trainer::step(std::span<const LabeledRow> batch) {
  if (batch.empty()) return;
  const auto k = num_intents_;
  active_.clear();
  for (const auto& ex : batch) {
    for (const auto& [f, v] : ex.features) {
      if (slot_[f] < 0) {
        slot_[f] = static_cast<std::int64_t>(active_.size());
        active_.push_back(f);
      }
    }
  }
  grad_.assign(active_.size() * k, 0.0);
  grad_bias_.assign(k, 0.0);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> s(k);
  for (const auto& ex : batch) {
    scores(ex.features, s);
    softmax(s);
    s[ex.label] -= 1.0;
    for (const auto& [f, v] : ex.features) {
      double* g = grad_.data() + static_cast<std::size_t>(slot_[f]) * k;
      const double vb = v * inv_b;
      for (std::size_t c = 0; c < k; ++c) g[c] += s[c] * vb;
    }
    for (std::size_t c = 0; c < k; ++c) grad_bias_[c] += s[c] * inv_b;
  }

  // W' = (1 - lr·l2)·W - lr·g, with W = scale·V.
  const double new_scale = scale_ * (1.0 - learning_rate_ * l2_);
  const double step = learning_rate_ / new_scale;
  for (std::size_t a = 0; a < active_.size(); ++a) {
    double* w = unscaled_.data() + static_cast<std::size_t>(active_[a]) * k;
    const double* g = grad_.data() + a * k;
    for (std::size_t c = 0; c < k; ++c) w[c] -= step * g[c];
    slot_[active_[a]] = -1;
  }
  for (std::size_t c = 0; c < k; ++c) bias_[c] -= learning_rate_ * grad_bias_[c];
  scale_ = new_scale;
  if (scale_ < 1e-6) {
    for (double& w : unscaled_) w *= scale_;
    scale_ = 1.0;
  }
}

WeightMatrix Trainer::weights() const {
  WeightMatrix out(num_intents_, num_features_);
  for (std::size_t i = 0; i < unscaled_.size(); ++i) out.data[i] = unscaled_[i] * scale_;
  std::copy(bias_.begin(), bias_.end(), out.data.begin() + static_cast<std::ptrdiff_t>(unscaled_.size()));
  return out;
}

IntentModel train(const TrainingCorpus& corpus, const Hyperparams& hp) {
  if (corpus.intents().empty()) throw TrainingError("cannot train on an empty corpus");
  if (hp.epochs < 0 || !(hp.learning_rate > 0.0) || hp.l2 < 0.0 || hp.batch_size == 0) {
    throw TrainingError("invalid hyperparameters");
  }
  const auto train_examples = corpus.examples_in(Split::Train);
  if (train_examples.empty()) throw TrainingError("corpus has no train examples");

  std::vector<FeatureVector> feats;
  feats.reserve(train_examples.size());
  std::set<std::string> names;
  for (const auto& ex : train_examples) {
    feats.push_back(featurize(ex.text));
    for (const auto& [name, v] : feats.back()) names.insert(name);
  }
  std::vector<std::string> vocabulary(names.begin(), names.end());
  std::unordered_map<std::string, std::uint32_t> ids;
  for (std::uint32_t i = 0; i < vocabulary.size(); ++i) ids.emplace(vocabulary[i], i);
  std::unordered_map<std::string, std::size_t> label_of;
  for (std::size_t i = 0; i < corpus.intents().size(); ++i) label_of.emplace(corpus.intents()[i], i);

  std::vector<LabeledRow> rows;
  rows.reserve(train_examples.size());
  for (std::size_t i = 0; i < train_examples.size(); ++i) {
    rows.push_back({encode_with(ids, feats[i]), label_of.at(train_examples[i].intent)});
  }

  Trainer trainer(corpus.intents().size(), vocabulary.size(), hp.learning_rate, hp.l2);
  std::mt19937_64 rng(hp.seed);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledRow> batch;
  batch.reserve(hp.batch_size);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      batch.clear();
      const auto end = std::min(order.size(), start + hp.batch_size);
      for (std::size_t j = start; j < end; ++j) batch.push_back(rows[order[j]]);
      trainer.step(batch);
    }
  }
  return IntentModel(corpus.intents(), std::move(vocabulary), trainer.weights(), hp, corpus.fingerprint());
}

void save_model(const IntentModel& model, const std::filesystem::path& path, const nlohmann::json& extra) {
  nlohmann::json header;
  header["format"] = IntentModel::kFormatTag;
  header["intents"] = model.intents();
  header["vocabulary"] = model.vocabulary();
  header["hyperparams"] = to_json(model.hyperparams());
  header["corpus_fingerprint"] = model.corpus_fingerprint();
  header["num_intents"] = model.weights().num_intents;
  header["num_features"] = model.weights().num_features;
  header["extra"] = extra;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = header_text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  const auto& data = model.weights().data;
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw IoError("failed writing model file '" + path.string() + "'");
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  char magic[sizeof kMagic];
  std::uint64_t len = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("'" + path.string() + "' is not a model file");
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1ULL << 34)) {
    throw FormatError("corrupt model header");
  }
  std::string header_text(len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated model header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("corrupt model header: ") + e.what());
  }
  const auto tag = header.value("format", std::string{});
  if (tag != IntentModel::kFormatTag) {
    throw FormatError("model format tag '" + tag + "' does not match expected '" +
                      std::string(IntentModel::kFormatTag) + "'");
  }
  try {
    Hyperparams hp;
    const auto& h = header.at("hyperparams");
    hp.epochs = h.at("epochs").get<int>();
    hp.learning_rate = h.at("learning_rate").get<double>();
    hp.l2 = h.at("l2").get<double>();
    hp.batch_size = h.at("batch_size").get<std::size_t>();
    hp.seed = h.at("seed").get<std::uint64_t>();
    WeightMatrix w(header.at("num_intents").get<std::size_t>(), header.at("num_features").get<std::size_t>());
    if (!in.read(reinterpret_cast<char*>(w.data.data()), static_cast<std::streamsize>(w.data.size() * sizeof(double)))) {
      throw FormatError("truncated weight matrix");
    }
    IntentModel model(header.at("intents").get<std::vector<IntentId>>(),
                      header.at("vocabulary").get<std::vector<std::string>>(), std::move(w), hp,
                      header.at("corpus_fingerprint").get<std::string>());
    return {std::move(model), header.value("extra", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt model header: ") + e.what());
  }
}

}  // namespace clarify::nlu
