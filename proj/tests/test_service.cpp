#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "clarify/error.hpp"
#include "clarify/service.hpp"
#include "doctest.h"
#include "httplib.h"
#include "support/fixtures.hpp"

using namespace clarify;
using namespace clarify::service;
using dialogue::ActionKind;
using nlohmann::json;

namespace {

struct FakeClock {
  std::shared_ptr<std::chrono::steady_clock::time_point> now =
      std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::time_point{});
  SessionStore::Clock fn() const {
    return [n = now] { return *n; };
  }
  void advance(std::chrono::milliseconds d) const { *now += d; }
};

std::shared_ptr<const dialogue::Engine> engine(dialogue::EngineConfig cfg = {}) {
  return std::make_shared<const dialogue::Engine>(clarify::testing::bank_engine(cfg));
}

std::filesystem::path temp_path(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

// Engine that sends "my card" to confirmation.
std::shared_ptr<const dialogue::Engine> confirming_engine() {
  const double c = clarify::testing::bank_model()->predict("my card").top().confidence;
  return engine({.tau_direct = std::nextafter(c, 2.0), .tau_fallback = 0.0});
}

}  // namespace

TEST_CASE("tokens") {
  std::set<std::string> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto t = new_token();
    CHECK(t.size() == 32);
    CHECK(t.find_first_not_of("0123456789abcdef") == std::string::npos);
    seen.insert(t);
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("session lifecycle in process") {
  FakeClock clock;
  Service svc(engine(), {.ttl = std::chrono::minutes(30), .clock = clock.fn()});
  const auto token = svc.create_session();

  const auto first = svc.post_message(token, "i lost my card");
  CHECK(first.session == token);
  CHECK(first.message_id == 1);
  const std::set<ActionKind> opening = {ActionKind::DirectAnswer, ActionKind::ConfirmPrompt, ActionKind::FaqTopicList,
                                        ActionKind::NoSuggestionsFallback};
  CHECK(opening.count(first.action.kind) == 1);
  CHECK(first.to_json()["expected_replies"].is_array());

  if (first.stage == dialogue::Stage::Idle) {
    CHECK_THROWS_AS(svc.post_reply(token, dialogue::Confirmation::Yes), ProtocolError);
  }
  CHECK_THROWS_AS(svc.post_reply(token, dialogue::TextInput{"hi"}), FormatError);
  const auto second = svc.post_message(token, "book a flight");
  CHECK(second.message_id == 2);

  const auto t = svc.get_transcript(token);
  CHECK(t["session"] == token);
  CHECK(t["transcript"].size() == 4);
  CHECK(t["transcript"][0]["actor"] == "user");
  CHECK(t["transcript"][1]["actor"] == "bot");

  CHECK_THROWS_AS(svc.post_message("0123456789abcdef0123456789abcdef", "hi"), SessionNotFound);

  clock.advance(std::chrono::minutes(29));
  CHECK_NOTHROW(svc.get_transcript(token));
  clock.advance(std::chrono::minutes(31));
  CHECK_THROWS_AS(svc.post_message(token, "hi"), SessionNotFound);
  CHECK_THROWS_AS(svc.get_transcript(token), SessionNotFound);

  const auto other = svc.create_session();
  CHECK(svc.sessions().size() == 1);
  clock.advance(std::chrono::hours(1));
  CHECK(svc.sessions().evict_expired() == 1);
  CHECK_THROWS_AS(svc.post_message(other, "hi"), SessionNotFound);
  CHECK(svc.health()["status"] == "ok");
}

TEST_CASE("illegal replies leave the session usable") {
  Service svc(confirming_engine());
  const auto token = svc.create_session();
  const auto a = svc.post_message(token, "my card");
  REQUIRE(a.action.kind == ActionKind::ConfirmPrompt);
  try {
    svc.post_reply(token, dialogue::SuggestionChoice{0});
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(e.expected() == std::vector<std::string>{"text", "confirm"});
  }
  const auto b = svc.post_reply(token, dialogue::Confirmation::No);
  CHECK(b.message_id == 2);
  CHECK(b.action.kind == ActionKind::SuggestionList);
  CHECK(svc.get_transcript(token)["transcript"].size() == 4);
}

TEST_CASE("model file with embedded assets reloads to an identical engine") {
  const auto corpus = clarify::testing::bank_corpus();
  const auto& model = *clarify::testing::bank_model();
  const auto path = temp_path("clarify_service_model.bin");
  save_model(model, corpus, path);
  const auto loaded = load_engine(path);
  const auto built = clarify::testing::bank_engine();
  CHECK(loaded.model() == model);
  CHECK(loaded.catalog() == built.catalog());
  CHECK(loaded.topics() == built.topics());
  CHECK(loaded.index().intents_of() == built.index().intents_of());
  for (const auto& x : corpus.examples()) {
    const auto p = model.predict(x.text);
    const auto q = loaded.model().predict(x.text);
    REQUIRE(p.ranked.size() == q.ranked.size());
    for (std::size_t i = 0; i < p.ranked.size(); ++i) {
      CHECK(p.ranked[i].intent == q.ranked[i].intent);
      CHECK(p.ranked[i].confidence == q.ranked[i].confidence);
    }
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_engine(path), IoError);
}

TEST_CASE("transcript log") {
  const auto path = temp_path("clarify_service_log.jsonl");
  std::filesystem::remove(path);
  {
    Service svc(engine(), {.transcript_log = path});
    const auto token = svc.create_session();
    svc.post_message(token, "transfer");
    svc.post_message(token, "flight");
  }
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l); ++n) CHECK(json::parse(l).contains("entry"));
  CHECK(n == 4);
  std::filesystem::remove(path);
}

TEST_CASE("sessions are isolated under concurrency") {
  Service svc(confirming_engine());
  constexpr int kThreads = 8;
  constexpr int kRounds = 25;
  std::vector<std::string> tokens;
  for (int i = 0; i < kThreads; ++i) tokens.push_back(svc.create_session());
  std::atomic<int> failures = 0;
  std::vector<std::thread> threads;
  for (int i = 0; i < kThreads; ++i) {
    threads.emplace_back([&, i] {
      std::uint64_t expect = 1;
      for (int r = 0; r < kRounds; ++r) {
        const auto a = svc.post_message(tokens[i], "my card");
        const auto b = svc.post_reply(tokens[i], dialogue::Confirmation::No);
        const auto c = svc.post_reply(tokens[i], dialogue::SuggestionChoice{});
        if (a.message_id != expect || b.message_id != expect + 1 || c.message_id != expect + 2) ++failures;
        if (b.action.kind != ActionKind::SuggestionList || c.action.kind != ActionKind::FaqTopicList) ++failures;
        expect += 3;
      }
    });
  }
  // Also hammer a single session from two threads; ids must stay unique.
  const auto shared = svc.create_session();
  std::vector<std::uint64_t> ids_a, ids_b;
  std::thread ta([&] { for (int r = 0; r < 50; ++r) ids_a.push_back(svc.post_message(shared, "transfer").message_id); });
  std::thread tb([&] { for (int r = 0; r < 50; ++r) ids_b.push_back(svc.post_message(shared, "flight").message_id); });
  for (auto& t : threads) t.join();
  ta.join();
  tb.join();
  CHECK(failures == 0);
  for (const auto& t : tokens) CHECK(svc.get_transcript(t)["transcript"].size() == 2 * 3 * kRounds);
  std::set<std::uint64_t> all(ids_a.begin(), ids_a.end());
  all.insert(ids_b.begin(), ids_b.end());
  CHECK(all.size() == 100);
  CHECK(*all.rbegin() == 100);
}

TEST_CASE("http api") {
  Service svc(confirming_engine());
  httplib::Server server;
  install_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto created = cli.Post("/sessions", "", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string token = json::parse(created->body)["session"];
  const std::string base = "/sessions/" + token;

  auto bad_json = cli.Post(base + "/messages", "{not json", "application/json");
  CHECK(bad_json->status == 400);
  CHECK(json::parse(bad_json->body)["error"]["code"] == "malformed_request");
  CHECK(cli.Post(base + "/messages", R"({"txt": "x"})", "application/json")->status == 400);
  CHECK(cli.Post(base + "/replies", R"({"type": "confirm", "value": "perhaps"})", "application/json")->status == 400);
  CHECK(cli.Post(base + "/replies", R"({"type": "text", "text": "x"})", "application/json")->status == 400);

  auto missing = cli.Post("/sessions/00000000000000000000000000000000/messages", R"({"text": "hi"})", "application/json");
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"]["code"] == "session_not_found");
  CHECK(cli.Get("/sessions/00000000000000000000000000000000/transcript")->status == 404);

  auto idle_confirm = cli.Post(base + "/replies", R"({"type": "confirm", "value": "yes"})", "application/json");
  CHECK(idle_confirm->status == 409);
  const auto err = json::parse(idle_confirm->body)["error"];
  CHECK(err["code"] == "illegal_reply");
  CHECK(err["expected"] == json::array({"text"}));

  std::vector<json> bot_actions;
  auto step = [&](const std::string& path, const std::string& body) {
    auto r = cli.Post(base + path, body, "application/json");
    REQUIRE(r);
    REQUIRE(r->status == 200);
    const auto j = json::parse(r->body);
    bot_actions.push_back(j["action"]);
    return j;
  };
  const auto m1 = step("/messages", R"({"text": "my card"})");
  CHECK(m1["action"]["kind"] == "ConfirmPrompt");
  CHECK(m1["stage"] == "AwaitingConfirmation");
  CHECK(m1["message_id"] == 1);
  const auto m2 = step("/replies", R"({"type": "confirm", "value": "no"})");
  CHECK(m2["action"]["kind"] == "SuggestionList");
  CHECK(m2["action"]["options"].size() == 6);
  const auto m3 = step("/replies", R"({"type": "none"})");
  CHECK(m3["action"]["kind"] == "FaqTopicList");
  step("/replies", R"({"type": "faq_topic", "index": 0})");
  const auto m5 = step("/replies", R"({"type": "faq_intent", "index": 0})");
  CHECK(m5["action"]["kind"] == "Answer");
  CHECK(m5["message_id"] == 5);

  auto tr = cli.Get(base + "/transcript");
  REQUIRE(tr->status == 200);
  const auto transcript = json::parse(tr->body)["transcript"];
  CHECK(transcript.size() == 10);

  // Replaying the user side through a fresh session reproduces every bot turn.
  dialogue::Session fresh;
  std::size_t k = 0;
  for (const auto& e : transcript) {
    if (e["actor"] != "user") continue;
    const auto action = svc.engine().handle(fresh, dialogue::user_input_from_json(e["content"]));
    CHECK(action.to_json() == bot_actions[k]);
    CHECK(action.to_json() == transcript[2 * k + 1]["content"]);
    ++k;
  }
  CHECK(k == 5);

  auto options = cli.Options(base + "/messages");
  CHECK(options->status == 204);

  server.stop();
  th.join();
}
