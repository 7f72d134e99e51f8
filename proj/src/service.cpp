#include "clarify/service.hpp"

#include <cstdio>
#include <random>

#include "clarify/keywords.hpp"
#include "httplib.h"

namespace clarify::service {

void save_model(const nlu::IntentModel& model, const TrainingCorpus& corpus, const std::filesystem::path& path,
                std::size_t keywords_per_intent) {
  const auto kw = keywords::extract_keywords(keywords::compute_tfidf(corpus), keywords_per_intent);
  nlu::save_model(model, path, dialogue::engine_assets(Catalog::from_corpus(corpus), kw));
}

dialogue::Engine load_engine(const std::filesystem::path& path, dialogue::EngineConfig config) {
  auto loaded = nlu::load_model(path);
  auto model = std::make_shared<const nlu::IntentModel>(std::move(loaded.model));
  return dialogue::engine_from_assets(std::move(model), loaded.extra, config);
}

std::string new_token() {
  static std::mutex mutex;
  static std::random_device device;
  std::uint32_t words[4];
  {
    std::lock_guard lock(mutex);
    for (auto& w : words) w = device();
  }
  char buf[33];
  std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", words[0], words[1], words[2], words[3]);
  return buf;
}

SessionStore::SessionStore(std::chrono::milliseconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {}

std::string SessionStore::create() {
  auto slot = std::make_shared<Slot>();
  slot->last_activity = clock_();
  std::lock_guard lock(mutex_);
  std::string token;
  do {
    token = new_token();
  } while (sessions_.count(token));
  slot->session.id = token;
  sessions_.emplace(token, std::move(slot));
  return token;
}

std::shared_ptr<SessionStore::Slot> SessionStore::acquire(const std::string& token) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) throw SessionNotFound("unknown session");
  // last_activity is written under the slot lock; a stale read here only
  // delays expiry by one request.
  std::shared_ptr<Slot> slot = it->second;
  std::unique_lock slot_lock(slot->mutex, std::try_to_lock);
  if (slot_lock.owns_lock() && clock_() - slot->last_activity > ttl_) {
    slot_lock.unlock();
    sessions_.erase(it);
    throw SessionNotFound("session expired");
  }
  return slot;
}

std::size_t SessionStore::evict_expired() {
  std::lock_guard lock(mutex_);
  const auto now = clock_();
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock slot_lock(it->second->mutex, std::try_to_lock);
    if (slot_lock.owns_lock() && now - it->second->last_activity > ttl_) {
      slot_lock.unlock();
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

nlohmann::json ApiResponse::to_json() const {
  return {{"session", session},
          {"message_id", message_id},
          {"stage", dialogue::to_string(stage)},
          {"expected_replies", dialogue::expected_replies(stage)},
          {"action", action.to_json()}};
}

Service::Service(std::shared_ptr<const dialogue::Engine> engine, ServiceOptions options)
    : engine_(std::move(engine)), options_(std::move(options)), sessions_(options_.ttl, options_.clock) {
  if (!engine_) throw ConfigError("service needs an engine");
  if (!options_.transcript_log.empty()) {
    log_.open(options_.transcript_log, std::ios::app);
    if (!log_) throw IoError("cannot open transcript log '" + options_.transcript_log.string() + "'");
  }
}

std::string Service::create_session() {
  sessions_.evict_expired();
  return sessions_.create();
}

ApiResponse Service::run(const std::string& token, const dialogue::UserInput& input) {
  return sessions_.with_session(token, [&](SessionStore::Slot& slot) {
    const auto before = slot.session.transcript.size();
    ApiResponse r;
    r.action = engine_->handle(slot.session, input);
    r.session = token;
    r.message_id = slot.next_message_id++;
    r.stage = slot.session.stage;
    append_log(token, slot.session.transcript, before);
    return r;
  });
}

ApiResponse Service::post_message(const std::string& token, const std::string& text) {
  return run(token, dialogue::TextInput{text});
}

ApiResponse Service::post_reply(const std::string& token, const dialogue::UserInput& reply) {
  if (std::holds_alternative<dialogue::TextInput>(reply)) {
    throw FormatError("free text goes to the messages endpoint, not replies");
  }
  return run(token, reply);
}

nlohmann::json Service::get_transcript(const std::string& token) {
  return sessions_.with_session(token, [&](SessionStore::Slot& slot) {
    return nlohmann::json{{"session", token}, {"transcript", dialogue::transcript_to_json(slot.session.transcript)}};
  });
}

nlohmann::json Service::health() const {
  return {{"status", "ok"},
          {"intents", engine_->model().intents().size()},
          {"model_format", nlu::IntentModel::kFormatTag},
          {"corpus_fingerprint", engine_->model().corpus_fingerprint()},
          {"config", engine_->config().to_json()},
          {"sessions", sessions_.size()}};
}

void Service::append_log(const std::string& token, const std::vector<dialogue::TranscriptEntry>& entries,
                         std::size_t from) {
  if (!log_.is_open()) return;
  const auto slice = std::vector<dialogue::TranscriptEntry>(entries.begin() + static_cast<std::ptrdiff_t>(from),
                                                            entries.end());
  std::lock_guard lock(log_mutex_);
  for (const auto& e : dialogue::transcript_to_json(slice)) {
    log_ << nlohmann::json{{"session", token}, {"entry", e}}.dump() << '\n';
  }
  log_.flush();
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::vector<std::string>* expected = nullptr) {
  nlohmann::json err = {{"code", code}, {"message", message}};
  if (expected) err["expected"] = *expected;
  send_json(res, status, {{"error", err}});
}

template <class F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const SessionNotFound& e) {
    send_error(res, 404, "session_not_found", e.what());
  } catch (const ProtocolError& e) {
    send_error(res, 409, "illegal_reply", e.what(), &e.expected());
  } catch (const FormatError& e) {
    send_error(res, 400, "malformed_request", e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "malformed_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal_error", e.what());
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace

void install_routes(httplib::Server& server, Service& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.health()); });
  });
  server.Post("/sessions", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, {{"session", service.create_session()}}); });
  });
  server.Post(R"(/sessions/([0-9a-f]+)/messages)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
        throw FormatError("message body needs a string 'text'");
      }
      send_json(res, 200, service.post_message(req.matches[1], body["text"].get<std::string>()).to_json());
    });
  });
  server.Post(R"(/sessions/([0-9a-f]+)/replies)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto reply = dialogue::user_input_from_json(parse_body(req));
      send_json(res, 200, service.post_reply(req.matches[1], reply).to_json());
    });
  });
  server.Get(R"(/sessions/([0-9a-f]+)/transcript)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.get_transcript(req.matches[1])); });
  });
}

}  // namespace clarify::service
