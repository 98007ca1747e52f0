#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "visbench/calibration.hpp"
#include "visbench/serialization.hpp"
#include "visbench/service.hpp"
#include "visbench/session.hpp"
#include "visbench/session_io.hpp"

#include "step_source.hpp"

using namespace visbench;
using namespace visbench::service;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("visbench_service_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    reopen();
  }
  void TearDown() override {
    service_.reset();
    std::filesystem::remove_all(dir_);
  }

  void reopen() {
    service_.reset();
    service_ = std::make_unique<BenchService>(ServiceConfig{dir_, 5}, std::vector{calibration::reference_profile()},
                                              clock_);
  }

  json call(std::string_view method, const std::string& target, const json& body, int expected) {
    const auto r = service_->handle(method, target, body.is_null() ? "" : body.dump());
    EXPECT_EQ(r.status, expected) << method << " " << target << " -> " << r.body.dump();
    return r.body;
  }
  json get(const std::string& target, int expected = 200) { return call("GET", target, nullptr, expected); }
  json post(const std::string& target, const json& body, int expected = 200) {
    return call("POST", target, body, expected);
  }

  static json create_body(const std::string& key = "k1", std::uint64_t seed = 5) {
    return json{{"schema_version", 1},
                {"idempotency_key", key},
                {"participant_index", 2},
                {"seed", seed},
                {"conditions",
                 {{{"device_label", "naked-eyes"}, {"light_level", {{"label", "normal"}, {"illuminance_lux", 572}}}},
                  {{"device_label", "quest-3"}, {"light_level", {{"label", "normal"}, {"illuminance_lux", 572}}}}}}};
  }

  std::string started(const json& body = create_body()) {
    const auto id = post("/v1/sessions", body, 201).at("session_id").get<std::string>();
    post("/v1/sessions/" + id + "/start", json{{"schema_version", 1}});
    return id;
  }

  json respond(const std::string& id, std::uint64_t sequence, const json& response, int expected = 200) {
    return post("/v1/sessions/" + id + "/responses",
                json{{"schema_version", 1}, {"sequence", sequence}, {"response", response}}, expected);
  }

  // Same policy as StepSource, decided from the JSON stimulus.
  json answer(const json& s, double acuity, double contrast) {
    const std::string kind = s.at("kind");
    if (kind == "rest") return json{{"acknowledge_rest", true}};
    if (kind == "hue_board") {
      const auto& groups = s.at("arrangement");
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto caps = groups[g].get<std::vector<int>>();
        for (std::size_t i = 1; i + 1 < caps.size(); ++i) {
          const int want = caps.front() + static_cast<int>(i);
          if (caps[i] != want) {
            const auto from = std::find(caps.begin(), caps.end(), want) - caps.begin();
            return json{{"move", {{"group", g + 1}, {"from", from}, {"to", i}}}};
          }
        }
      }
      return json{{"submit", true}};
    }
    if (s.at("test") == "acuity") {
      const auto o = session::orientation_from_string(s.at("orientation").get<std::string>());
      const bool ok = s.at("level").get<double>() > acuity;
      return json{{"orientation", session::to_string(ok ? o : static_cast<session::Orientation>((static_cast<int>(o) + 1) % 4))}};
    }
    const std::string letters = s.at("letters");
    if (s.at("level").get<double>() > contrast) return json{{"letters", letters}};
    std::string wrong;
    for (char c : session::kSloanLetters) {
      if (letters.find(c) == std::string::npos && wrong.size() < 2) wrong += c;
    }
    return json{{"letters", wrong}};
  }

  // Answers until complete or `limit` accepted responses.
  void drive(const std::string& id, double acuity, double contrast, int limit = 1 << 30) {
    for (int n = 0; n < limit; ++n) {
      const auto r = service_->handle("GET", "/v1/sessions/" + id + "/stimulus", "");
      if (r.status == 409 && r.body.at("error").at("code") == "session_complete") return;
      ASSERT_EQ(r.status, 200) << r.body.dump();
      const auto& s = r.body.at("stimulus");
      const auto body = json{{"schema_version", 1}, {"sequence", s.at("sequence")},
                             {"response", answer(s, acuity, contrast)}};
      const auto out = service_->handle("POST", "/v1/sessions/" + id + "/responses", body.dump());
      if (out.status == 409 && out.body.at("error").at("code") == "hue_minimum_time") {
        clock_.advance(out.body.at("error").at("remaining_seconds").get<double>());
        --n;
        continue;
      }
      ASSERT_EQ(out.status, 200) << out.body.dump();
      clock_.advance(2.0);
    }
  }

  std::filesystem::path dir_;
  session::ManualClock clock_;
  std::unique_ptr<BenchService> service_;
};

}  // namespace

TEST_F(ServiceTest, HealthAndCalibrations) {
  const auto h = get("/v1/health");
  EXPECT_EQ(h.at("status"), "ok");
  EXPECT_EQ(h.at("schema_version"), 1);
  const auto c = get("/v1/calibrations");
  ASSERT_EQ(c.at("calibrations").size(), 1u);
  EXPECT_EQ(c.at("calibrations")[0].at("id"), "reference-phone-1m");
  EXPECT_EQ(get("/v1/nope", 404).at("error").at("code"), "not_found");
  EXPECT_EQ(call("DELETE", "/v1/health", nullptr, 405).at("error").at("code"), "method_not_allowed");
}

TEST_F(ServiceTest, CreateIsIdempotent) {
  const auto a = post("/v1/sessions", create_body(), 201);
  EXPECT_TRUE(a.at("created").get<bool>());
  EXPECT_EQ(a.at("status"), "created");
  const auto b = post("/v1/sessions", create_body(), 200);
  EXPECT_FALSE(b.at("created").get<bool>());
  EXPECT_EQ(b.at("session_id"), a.at("session_id"));
  const auto c = post("/v1/sessions", create_body("k1", 6), 409);
  EXPECT_EQ(c.at("error").at("code"), "idempotency_conflict");
  EXPECT_EQ(c.at("error").at("field"), "idempotency_key");
  EXPECT_EQ(get("/v1/sessions").at("sessions").size(), 1u);
  // Survives a restart.
  reopen();
  EXPECT_EQ(post("/v1/sessions", create_body(), 200).at("session_id"), a.at("session_id"));
}

TEST_F(ServiceTest, CreateValidation) {
  auto body = create_body();
  body.erase("schema_version");
  EXPECT_EQ(post("/v1/sessions", body, 400).at("error").at("field"), "schema_version");
  body = create_body();
  body["schema_version"] = 2;
  EXPECT_EQ(post("/v1/sessions", body, 400).at("error").at("field"), "schema_version");
  body = create_body();
  body["bogus"] = true;
  EXPECT_EQ(post("/v1/sessions", body, 400).at("error").at("code"), "validation_error");
  body = create_body();
  body["conditions"][0]["light_level"]["illuminance_lux"] = 0;
  EXPECT_EQ(post("/v1/sessions", body, 400).at("error").at("field"), "conditions[0].light_level.illuminance_lux");
  body = create_body();
  body["conditions"] = json::array();
  EXPECT_EQ(post("/v1/sessions", body, 400).at("error").at("field"), "conditions");
  body = create_body();
  body["tests"] = {"acuity", "smell"};
  EXPECT_EQ(post("/v1/sessions", body, 400).at("error").at("field"), "tests");
  body = create_body();
  body["calibration_id"] = "unknown-phone";
  EXPECT_EQ(post("/v1/sessions", body, 422).at("error").at("code"), "unknown_calibration");
  const auto r = service_->handle("POST", "/v1/sessions", "{oops");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body.at("error").at("code"), "malformed_json");
  EXPECT_EQ(get("/v1/sessions/doesnotexist", 404).at("error").at("code"), "not_found");
}

TEST_F(ServiceTest, LifecycleTransitions) {
  const auto id = post("/v1/sessions", create_body(), 201).at("session_id").get<std::string>();
  EXPECT_EQ(get("/v1/sessions/" + id + "/stimulus", 409).at("error").at("code"), "not_running");
  EXPECT_EQ(post("/v1/sessions/" + id + "/suspend", json{{"schema_version", 1}}, 409).at("error").at("code"),
            "invalid_transition");
  EXPECT_EQ(get("/v1/sessions/" + id + "/results").at("empty"), true);
  post("/v1/sessions/" + id + "/start", json{{"schema_version", 1}});
  post("/v1/sessions/" + id + "/start", json{{"schema_version", 1}}, 409);
  const auto s = post("/v1/sessions/" + id + "/suspend", json{{"schema_version", 1}});
  EXPECT_EQ(s.at("progress").at("status"), "suspended");
  EXPECT_EQ(get("/v1/sessions/" + id + "/stimulus", 409).at("error").at("code"), "not_running");
  post("/v1/sessions/" + id + "/resume", json{{"schema_version", 1}});
  const auto d = get("/v1/sessions/" + id);
  EXPECT_EQ(d.at("progress").at("status"), "running");
  EXPECT_EQ(d.at("progress").at("total_tests"), 6);
  EXPECT_EQ(d.at("plan").at("participant_index"), 2);
}

TEST_F(ServiceTest, StimulusAndResponses) {
  auto body = create_body();
  body["tests"] = {"acuity"};
  const auto id = started(body);
  const auto st = get("/v1/sessions/" + id + "/stimulus").at("stimulus");
  // Repeat fetch shows the same pending stimulus.
  EXPECT_EQ(get("/v1/sessions/" + id + "/stimulus").at("stimulus"), st);
  const auto seq = st.at("sequence").get<std::uint64_t>();
  EXPECT_EQ(st.at("kind"), "trial");
  EXPECT_TRUE(st.contains("condition"));

  const auto stale = respond(id, seq + 5, answer(st, 0.0, 0.0), 409);
  EXPECT_EQ(stale.at("error").at("code"), "stale_sequence");
  EXPECT_EQ(stale.at("error").at("expected_sequence"), seq);

  EXPECT_EQ(respond(id, seq, json{{"orientation", "sideways"}}, 400).at("error").at("field"), "response.orientation");
  EXPECT_EQ(respond(id, seq, json{{"teleport", 1}}, 400).at("error").at("field"), "response.teleport");
  EXPECT_EQ(respond(id, seq, json{{"letters", "C"}, {"submit", true}}, 400).at("error").at("field"), "response");

  const auto reply = answer(st, 0.0, 0.0);
  const auto first = respond(id, seq, reply);
  EXPECT_TRUE(first.at("accepted").get<bool>());
  EXPECT_FALSE(first.at("duplicate").get<bool>());
  // A retried request is acknowledged without recording twice.
  const auto again = respond(id, seq, reply);
  EXPECT_TRUE(again.at("duplicate").get<bool>());
  EXPECT_EQ(again.at("sequence"), first.at("sequence"));
  const auto tab = service_->handle("GET", "/v1/sessions/" + id + "/export?format=tabular", "");
  EXPECT_EQ(tab.content_type, "text/csv");
  const auto records = session::import_tabular(*tab.raw_body);
  EXPECT_EQ(std::count_if(records.begin(), records.end(),
                          [&](const session::TrialRecord& r) { return r.sequence == seq; }),
            1);
  EXPECT_EQ(get("/v1/sessions/" + id + "/export?format=xml", 400).at("error").at("field"), "format");
}

TEST_F(ServiceTest, HueMinimumTimeReportsRemaining) {
  auto body = create_body();
  body["tests"] = {"hue"};
  const auto id = started(body);
  const auto st = get("/v1/sessions/" + id + "/stimulus").at("stimulus");
  ASSERT_EQ(st.at("kind"), "hue_board");
  EXPECT_EQ(st.at("colors").size(), 4u);
  EXPECT_EQ(st.at("colors")[0][0].get<std::string>().size(), 7u);
  clock_.advance(400.0);
  const auto early = respond(id, st.at("sequence"), json{{"submit", true}}, 409);
  EXPECT_EQ(early.at("error").at("code"), "hue_minimum_time");
  EXPECT_NEAR(early.at("error").at("remaining_seconds").get<double>(), 80.0, 1e-9);
  clock_.advance(80.0);
  const auto ok = respond(id, st.at("sequence"), json{{"submit", true}});
  EXPECT_TRUE(ok.at("task_complete").get<bool>());
}

// Driving a session over the API yields the same result as the library
// runner with the same plan and answers.
TEST_F(ServiceTest, ApiMatchesLibrary) {
  const auto created = post("/v1/sessions", create_body(), 201);
  const auto id = created.at("session_id").get<std::string>();
  post("/v1/sessions/" + id + "/start", json{{"schema_version", 1}});
  drive(id, 0.3, 0.5);
  const auto api = get("/v1/sessions/" + id + "/results");
  EXPECT_EQ(api.at("status"), "complete");
  ASSERT_TRUE(api.at("result").at("complete").get<bool>());

  const auto plan = created.at("plan").get<session::SessionPlan>();
  session::ManualClock clock;
  session::SessionRunner runner(plan, clock);
  session::StepSource source(clock, 0.3, 0.5);
  ASSERT_EQ(session::drive(runner, source), session::RunStatus::Complete);
  EXPECT_EQ(json(runner.result()), api.at("result"));

  const auto structured = service_->handle("GET", "/v1/sessions/" + id + "/export?format=structured", "");
  const auto doc = session::import_structured(structured.body.dump());
  EXPECT_EQ(doc.records, runner.records());
  EXPECT_EQ(get("/v1/sessions/" + id + "/stimulus", 409).at("error").at("code"), "session_complete");
}

TEST_F(ServiceTest, ReloadContinuesWhereItStopped) {
  const auto id = started();
  drive(id, 0.3, 0.5, 23);
  const auto before = get("/v1/sessions/" + id);
  reopen();
  EXPECT_TRUE(service_->load_warnings().empty());
  EXPECT_EQ(get("/v1/sessions/" + id).at("progress"), before.at("progress"));
  drive(id, 0.3, 0.5);
  EXPECT_TRUE(get("/v1/sessions/" + id + "/results").at("result").at("complete").get<bool>());
}

TEST_F(ServiceTest, TornLogLineIsDropped) {
  const auto id = started();
  drive(id, 0.3, 0.5, 12);
  const auto before = get("/v1/sessions/" + id);
  service_.reset();
  const auto log = dir_ / "sessions" / id / "events.jsonl";
  ASSERT_TRUE(std::filesystem::exists(log));
  {
    std::ofstream out(log, std::ios::app);
    out << R"({"sequence": 99, "kind": "tri)";
  }
  reopen();
  EXPECT_FALSE(service_->load_warnings().empty());
  EXPECT_EQ(get("/v1/sessions/" + id).at("progress"), before.at("progress"));
  drive(id, 0.3, 0.5);
  EXPECT_TRUE(get("/v1/sessions/" + id + "/results").at("result").at("complete").get<bool>());
}

TEST(HttpServer, LoopbackRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "visbench_http_test";
  std::filesystem::remove_all(dir);
  session::ManualClock clock;
  BenchService service(ServiceConfig{dir, 50}, {}, clock);
  HttpServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 100 && !client.Get("/v1/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  const auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body).at("status"), "ok");
  const json body{{"schema_version", 1},
                  {"seed", 1},
                  {"tests", {"acuity"}},
                  {"conditions", {{{"device_label", "d"}, {"light_level", {{"label", "l"}, {"illuminance_lux", 10}}}}}}};
  const auto created = client.Post("/v1/sessions", body.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = json::parse(created->body).at("session_id").get<std::string>();
  const auto tab = client.Get("/v1/sessions/" + id + "/export?format=tabular");
  ASSERT_TRUE(tab);
  EXPECT_EQ(tab->get_header_value("Content-Type"), "text/csv");
  const auto bad = client.Post("/v1/sessions", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  server.stop();
  t.join();
  std::filesystem::remove_all(dir);
}
