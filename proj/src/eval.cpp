#include "clarify/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "clarify/error.hpp"

namespace clarify::eval {

using dialogue::ActionKind;
using dialogue::BotAction;

std::string_view to_string(TerminalStage s) {
  switch (s) {
    case TerminalStage::Direct: return "Direct";
    case TerminalStage::Confirmation: return "Confirmation";
    case TerminalStage::Suggestion: return "Suggestion";
    case TerminalStage::Faq: return "Faq";
  }
  return "Unknown";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Good: return "Good";
    case Verdict::Bad: return "Bad";
    case Verdict::Fallback: return "Fallback";
  }
  return "Unknown";
}

Verdict verdict_for(const IntentId& gold, const std::optional<IntentId>& delivered) {
  if (!delivered) return Verdict::Fallback;
  return *delivered == gold ? Verdict::Good : Verdict::Bad;
}

std::optional<dialogue::UserInput> simulate_user(const IntentId& gold, const BotAction& action) {
  switch (action.kind) {
    case ActionKind::ConfirmPrompt:
      return !action.intents.empty() && action.intents.front() == gold ? dialogue::Confirmation::Yes
                                                                       : dialogue::Confirmation::No;
    case ActionKind::SuggestionList:
      for (std::size_t i = 0; i < action.intents.size(); ++i) {
        if (action.intents[i] == gold) return dialogue::SuggestionChoice{i};
      }
      return dialogue::SuggestionChoice{std::nullopt};
    default:
      return std::nullopt;
  }
}

EpisodeOutcome run_episode(const dialogue::Engine& engine, const std::string& query, const IntentId& gold) {
  EpisodeOutcome out;
  out.query = query;
  out.gold = gold;
  dialogue::Session session;
  auto prediction = engine.model().predict(query);
  out.predicted = prediction.top().intent;
  out.confidence = prediction.top().confidence;
  auto action = engine.handle_predicted(session, query, prediction);
  auto stage = TerminalStage::Direct;
  // Bounded: the oracle never navigates FAQ, so at most confirm + choice.
  for (int turn = 0; turn < 8; ++turn) {
    out.path.emplace_back(dialogue::to_string(action.kind));
    switch (action.kind) {
      case ActionKind::ConfirmPrompt: stage = TerminalStage::Confirmation; break;
      case ActionKind::SuggestionList: stage = TerminalStage::Suggestion; break;
      case ActionKind::FaqTopicList:
      case ActionKind::FaqIntentList:
      case ActionKind::NoSuggestionsFallback: stage = TerminalStage::Faq; break;
      default: break;
    }
    if (action.resolved_intent) {
      out.delivered = action.resolved_intent;
      break;
    }
    auto reply = simulate_user(gold, action);
    if (!reply) break;
    action = engine.handle(session, *reply);
  }
  out.terminal_stage = stage;
  out.verdict = verdict_for(gold, out.delivered);
  return out;
}

nlohmann::json Funnel::to_json() const {
  return {{"direct_entered", direct_entered},
          {"direct_correct", direct_correct},
          {"confirm_entered", confirm_entered},
          {"confirmed", confirmed},
          {"suggestion_entered", suggestion_entered},
          {"suggestion_offered", suggestion_offered},
          {"suggestion_correct", suggestion_correct},
          {"faq_entered", faq_entered},
          {"faq_from_low_confidence", faq_from_low_confidence}};
}

F1Scores compute_f1(std::span<const EpisodeOutcome> outcomes, std::span<const IntentId> intents) {
  if (outcomes.empty()) throw Error("F1 needs at least one episode");
  std::map<IntentId, std::size_t> tp, fp, fn;
  std::size_t good = 0;
  for (const auto& o : outcomes) {
    switch (o.verdict) {
      case Verdict::Good:
        ++tp[o.gold];
        ++good;
        break;
      case Verdict::Bad:
        ++fn[o.gold];
        ++fp[*o.delivered];
        break;
      case Verdict::Fallback:
        ++fn[o.gold];
        break;
    }
  }
  F1Scores out;
  out.micro_f1 = static_cast<double>(good) / static_cast<double>(outcomes.size());
  double sum = 0.0;
  for (const auto& intent : intents) {
    const double t = static_cast<double>(tp[intent]);
    const double p_den = t + static_cast<double>(fp[intent]);
    const double r_den = t + static_cast<double>(fn[intent]);
    IntentScores s;
    s.precision = p_den > 0 ? t / p_den : 0.0;
    s.recall = r_den > 0 ? t / r_den : 0.0;
    s.f1 = t > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.support = tp[intent] + fn[intent];
    sum += s.f1;
    out.per_intent[intent] = s;
  }
  out.macro_f1 = intents.empty() ? 0.0 : sum / static_cast<double>(intents.size());
  return out;
}

double EvalReport::rate(Verdict v) const {
  const auto n = total();
  if (n == 0) return 0.0;
  const auto c = v == Verdict::Good ? good : v == Verdict::Bad ? bad : fallback;
  return static_cast<double>(c) / static_cast<double>(n);
}

nlohmann::json EvalReport::summary() const {
  nlohmann::json j;
  j["system"] = system;
  j["config"] = config;
  j["queries"] = total();
  j["good"] = good;
  j["bad"] = bad;
  j["fallback"] = fallback;
  j["good_rate"] = rate(Verdict::Good);
  j["bad_rate"] = rate(Verdict::Bad);
  j["fallback_rate"] = rate(Verdict::Fallback);
  j["macro_f1"] = f1.macro_f1;
  j["micro_f1"] = f1.micro_f1;
  j["macro_f1_averaged_over"] = "test intents only";
  if (funnel) j["funnel"] = funnel->to_json();
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [intent, s] : f1.per_intent) {
    per[intent] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  j["per_intent"] = per;
  return j;
}

std::vector<IntentId> gold_intents(std::span<const Example> queries) {
  std::vector<IntentId> out;
  std::set<IntentId> seen;
  for (const auto& q : queries) {
    if (seen.insert(q.intent).second) out.push_back(q.intent);
  }
  return out;
}

namespace {

void tally(EvalReport& r) {
  r.good = r.bad = r.fallback = 0;
  for (const auto& e : r.episodes) {
    switch (e.verdict) {
      case Verdict::Good: ++r.good; break;
      case Verdict::Bad: ++r.bad; break;
      case Verdict::Fallback: ++r.fallback; break;
    }
  }
}

bool path_contains(const EpisodeOutcome& e, std::string_view kind) {
  for (const auto& p : e.path) {
    if (p == kind) return true;
  }
  return false;
}

}  // namespace

EvalReport evaluate_pipeline(const dialogue::Engine& engine, std::span<const Example> test) {
  if (test.empty()) throw Error("evaluation needs a non-empty test set");
  EvalReport r;
  r.system = "clarification";
  r.config = engine.config().to_json();
  Funnel f;
  for (const auto& q : test) {
    auto e = run_episode(engine, q.text, q.intent);
    const auto first = dialogue::to_string(ActionKind::DirectAnswer);
    if (e.path.front() == first) {
      ++f.direct_entered;
      if (e.verdict == Verdict::Good) ++f.direct_correct;
    }
    if (e.path.front() == dialogue::to_string(ActionKind::ConfirmPrompt)) {
      ++f.confirm_entered;
      if (e.path.size() == 2 && e.path[1] == dialogue::to_string(ActionKind::Answer)) ++f.confirmed;
      else ++f.suggestion_entered;
    }
    if (path_contains(e, dialogue::to_string(ActionKind::SuggestionList))) {
      ++f.suggestion_offered;
      if (e.terminal_stage == TerminalStage::Suggestion && e.verdict == Verdict::Good) ++f.suggestion_correct;
    }
    if (e.terminal_stage == TerminalStage::Faq) {
      ++f.faq_entered;
      if (e.path.size() == 1) ++f.faq_from_low_confidence;
    }
    r.episodes.push_back(std::move(e));
  }
  r.funnel = f;
  tally(r);
  r.f1 = compute_f1(r.episodes, gold_intents(test));
  return r;
}

EvalReport evaluate_pipeline(const dialogue::Engine& engine, const TrainingCorpus& corpus) {
  return evaluate_pipeline(engine, corpus.examples_in(Split::Test));
}

EvalReport evaluate_baseline(const nlu::IntentModel& model, std::span<const Example> test, double threshold,
                             BaselineMode mode) {
  if (test.empty()) throw Error("evaluation needs a non-empty test set");
  EvalReport r;
  r.system = mode == BaselineMode::Simple ? "simple_fallback" : "optimized_fallback";
  r.config = {{"threshold", threshold}};
  for (const auto& q : test) {
    const auto p = model.predict(q.text);
    EpisodeOutcome e;
    e.query = q.text;
    e.gold = q.intent;
    e.predicted = p.top().intent;
    e.confidence = p.top().confidence;
    if (e.confidence >= threshold) {
      e.delivered = e.predicted;
      e.terminal_stage = TerminalStage::Direct;
      e.path = {"DirectAnswer"};
    } else {
      e.terminal_stage = TerminalStage::Faq;
      e.path = {"Fallback"};
    }
    e.verdict = verdict_for(q.intent, e.delivered);
    r.episodes.push_back(std::move(e));
  }
  tally(r);
  r.f1 = compute_f1(r.episodes, gold_intents(test));
  return r;
}

EvalReport evaluate_baseline(const nlu::IntentModel& model, const TrainingCorpus& corpus, double threshold,
                             BaselineMode mode) {
  return evaluate_baseline(model, corpus.examples_in(Split::Test), threshold, mode);
}

std::vector<double> default_grid(double step) {
  if (!(step > 0.0) || step >= 1.0) throw ConfigError("grid step must be in (0, 1)");
  std::vector<double> grid;
  for (int i = 1;; ++i) {
    const double v = std::round(i * step * 1e9) / 1e9;
    if (v >= 1.0 - 1e-12) break;
    grid.push_back(v);
  }
  return grid;
}

std::vector<ScoredQuery> score_queries(const nlu::IntentModel& model, std::span<const Example> queries) {
  std::vector<ScoredQuery> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const auto p = model.predict(q.text);
    out.push_back({p.top().confidence, p.top().intent == q.intent});
  }
  return out;
}

std::size_t correct_direct_answers(std::span<const ScoredQuery> queries, double threshold) {
  std::size_t n = 0;
  for (const auto& q : queries) {
    if (q.top_correct && q.confidence >= threshold) ++n;
  }
  return n;
}

double optimize_threshold(std::span<const ScoredQuery> validation, std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("threshold grid is empty");
  if (validation.empty()) throw Error("threshold optimization needs a validation set");
  double best = grid.front();
  std::size_t best_count = 0;
  bool first = true;
  for (double t : grid) {
    const auto c = correct_direct_answers(validation, t);
    if (first || c > best_count || (c == best_count && t < best)) {
      best = t;
      best_count = c;
      first = false;
    }
  }
  return best;
}

double optimize_threshold(const nlu::IntentModel& model, std::span<const Example> validation,
                          std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("threshold grid is empty");
  return optimize_threshold(score_queries(model, validation), grid);
}

namespace {

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * v << "%";
  return s.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

struct Row {
  std::string label;
  std::vector<std::string> cells;
};

std::vector<Row> metric_rows(std::span<const EvalReport> reports) {
  std::vector<Row> rows = {{"Good answers", {}}, {"Bad answers", {}}, {"Fallback", {}}, {"macro-F1", {}}, {"micro-F1", {}}};
  for (const auto& r : reports) {
    rows[0].cells.push_back(percent(r.rate(Verdict::Good)) + " (" + std::to_string(r.good) + ")");
    rows[1].cells.push_back(percent(r.rate(Verdict::Bad)) + " (" + std::to_string(r.bad) + ")");
    rows[2].cells.push_back(percent(r.rate(Verdict::Fallback)) + " (" + std::to_string(r.fallback) + ")");
    rows[3].cells.push_back(fixed(r.f1.macro_f1, 2));
    rows[4].cells.push_back(fixed(r.f1.micro_f1, 2));
  }
  return rows;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string comparison_table(std::span<const EvalReport> reports) {
  const auto rows = metric_rows(reports);
  std::size_t label_w = 12;
  std::vector<std::size_t> w;
  for (const auto& r : reports) w.push_back(r.system.size());
  for (const auto& row : rows) {
    label_w = std::max(label_w, row.label.size());
    for (std::size_t i = 0; i < row.cells.size(); ++i) w[i] = std::max(w[i], row.cells[i].size());
  }
  std::ostringstream s;
  auto line = [&](const std::string& label, const std::vector<std::string>& cells) {
    s << std::left << std::setw(static_cast<int>(label_w)) << label;
    for (std::size_t i = 0; i < cells.size(); ++i) s << " | " << std::setw(static_cast<int>(w[i])) << cells[i];
    s << "\n";
  };
  std::vector<std::string> header;
  for (const auto& r : reports) header.push_back(r.system);
  line("", header);
  line(std::string(label_w, '-'), [&] {
    std::vector<std::string> dashes;
    for (auto x : w) dashes.emplace_back(x, '-');
    return dashes;
  }());
  for (const auto& row : rows) line(row.label, row.cells);
  return s.str();
}

std::vector<std::filesystem::path> emit_report(std::span<const EvalReport> reports, const std::filesystem::path& dir) {
  if (reports.empty()) throw Error("no reports to emit");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  const auto txt = dir / "comparison.txt";
  write_file(txt, "# macro-F1 averaged over test intents only; micro-F1 = Good rate\n" + comparison_table(reports));
  written.push_back(txt);

  std::ostringstream tsv;
  tsv << "metric";
  for (const auto& r : reports) tsv << '\t' << r.system;
  tsv << '\n';
  for (const auto& row : metric_rows(reports)) {
    tsv << row.label;
    for (const auto& c : row.cells) tsv << '\t' << c;
    tsv << '\n';
  }
  const auto tsv_path = dir / "comparison.tsv";
  write_file(tsv_path, tsv.str());
  written.push_back(tsv_path);

  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(r.summary());
  const auto json_path = dir / "comparison.json";
  write_file(json_path, j.dump(2) + "\n");
  written.push_back(json_path);

  for (const auto& r : reports) {
    std::ostringstream log;
    log << "query\tgold\tpredicted\tconfidence\tpath\tdelivered\tterminal_stage\tverdict\n";
    for (const auto& e : r.episodes) {
      std::string path;
      for (const auto& p : e.path) path += (path.empty() ? "" : ">") + p;
      log << e.query << '\t' << e.gold << '\t' << e.predicted << '\t' << fixed(e.confidence, 6) << '\t' << path
          << '\t' << e.delivered.value_or("-") << '\t' << to_string(e.terminal_stage) << '\t'
          << to_string(e.verdict) << '\n';
    }
    const auto p = dir / ("episodes_" + r.system + ".tsv");
    write_file(p, log.str());
    written.push_back(p);
  }
  return written;
}

}  // namespace clarify::eval
