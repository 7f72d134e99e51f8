#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <type_traits>
#include <string>

#include "clarify/corpus.hpp"
#include "clarify/dialogue.hpp"
#include "clarify/error.hpp"
#include "clarify/nlu.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace clarify::service {

class SessionNotFound : public Error {
 public:
  using Error::Error;
};

// Writes the model together with the dialogue assets derived from `corpus`.
void save_model(const nlu::IntentModel& model, const TrainingCorpus& corpus, const std::filesystem::path& path,
                std::size_t keywords_per_intent = 5);
dialogue::Engine load_engine(const std::filesystem::path& path, dialogue::EngineConfig config = {});

// 128-bit random token as 32 lowercase hex characters.
std::string new_token();

// In-memory sessions with idle expiry. Each session has its own lock; the
// map lock is held only for lookup.
class SessionStore {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  struct Slot {
    std::mutex mutex;
    dialogue::Session session;
    std::uint64_t next_message_id = 1;
    std::chrono::steady_clock::time_point last_activity;
  };

  explicit SessionStore(std::chrono::milliseconds ttl = std::chrono::minutes(30),
                        Clock clock = [] { return std::chrono::steady_clock::now(); });

  std::string create();

  // Calls fn(Slot&) with the session locked. Throws SessionNotFound for
  // unknown or expired tokens.
  template <class F>
  auto with_session(const std::string& token, F&& fn) {
    auto slot = acquire(token);
    std::lock_guard lock(slot->mutex);
    auto touch = [&] { slot->last_activity = clock_(); };
    if constexpr (std::is_void_v<decltype(fn(*slot))>) {
      fn(*slot);
      touch();
    } else {
      auto result = fn(*slot);
      touch();
      return result;
    }
  }

  std::size_t evict_expired();
  std::size_t size() const;

 private:
  std::shared_ptr<Slot> acquire(const std::string& token);

  std::chrono::milliseconds ttl_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

struct ApiResponse {
  std::string session;
  std::uint64_t message_id = 0;
  dialogue::Stage stage = dialogue::Stage::Idle;
  dialogue::BotAction action;

  nlohmann::json to_json() const;
};

struct ServiceOptions {
  std::chrono::milliseconds ttl = std::chrono::minutes(30);
  // Transcript entries are appended here as JSON lines when set.
  std::filesystem::path transcript_log;
  SessionStore::Clock clock = [] { return std::chrono::steady_clock::now(); };
};

class Service {
 public:
  Service(std::shared_ptr<const dialogue::Engine> engine, ServiceOptions options = {});

  std::string create_session();
  ApiResponse post_message(const std::string& token, const std::string& text);
  // Structured replies only (confirm, choice, none, FAQ navigation).
  ApiResponse post_reply(const std::string& token, const dialogue::UserInput& reply);
  nlohmann::json get_transcript(const std::string& token);
  nlohmann::json health() const;

  const dialogue::Engine& engine() const { return *engine_; }
  SessionStore& sessions() { return sessions_; }

 private:
  ApiResponse run(const std::string& token, const dialogue::UserInput& input);
  void append_log(const std::string& token, const std::vector<dialogue::TranscriptEntry>& entries, std::size_t from);

  std::shared_ptr<const dialogue::Engine> engine_;
  ServiceOptions options_;
  SessionStore sessions_;
  std::mutex log_mutex_;
  std::ofstream log_;
};

// Routes:
//   GET  /health
//   POST /sessions
//   POST /sessions/{token}/messages    {"text": "..."}
//   POST /sessions/{token}/replies     {"type": "confirm", "value": "yes"} ...
//   GET  /sessions/{token}/transcript
// Errors: {"error": {"code", "message", "expected"?}} with 400/404/409.
void install_routes(httplib::Server& server, Service& service);

}  // namespace clarify::service
