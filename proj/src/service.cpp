#include "visbench/service.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <random>

#include "visbench/errors.hpp"
#include "visbench/serialization.hpp"
#include "visbench/session_io.hpp"

using nlohmann::json;

namespace visbench::service {
namespace {

/// Error with an HTTP status; becomes the standard error body.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message, std::string field = {}, json extra = {})
      : std::runtime_error(message),
        status_(status),
        code_(std::move(code)),
        field_(std::move(field)),
        extra_(std::move(extra)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }
  const json& extra() const noexcept { return extra_; }

 private:
  int status_;
  std::string code_;
  std::string field_;
  json extra_;
};

HttpResponse error_response(int status, const std::string& code, const std::string& message,
                            const std::string& field = {}, const json& extra = {}) {
  json err{{"code", code}, {"message", message}, {"field", field.empty() ? json(nullptr) : json(field)}};
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) err[k] = v;
  }
  return HttpResponse{status, json{{"schema_version", kSchemaVersion}, {"error", err}}, std::nullopt,
                      "application/json"};
}

HttpResponse ok(int status, json body) {
  body["schema_version"] = kSchemaVersion;
  return HttpResponse{status, std::move(body), std::nullopt, "application/json"};
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ApiError(400, "malformed_json", std::string("request body is not valid JSON: ") + e.what());
  }
}

void require_schema_version(const json& req) {
  if (!req.contains("schema_version")) throw ValidationError("schema_version", "schema_version is required");
  if (!req.at("schema_version").is_number_integer() || req.at("schema_version").get<int>() != kSchemaVersion) {
    throw ValidationError("schema_version", "unsupported schema_version; expected 1");
  }
}

std::string get_string(const json& j, const char* key, const std::string& field, bool required = true) {
  if (!j.contains(key)) {
    if (required) throw ValidationError(field, field + " is required");
    return {};
  }
  if (!j.at(key).is_string()) throw ValidationError(field, field + " must be a string");
  return j.at(key).get<std::string>();
}

double get_number(const json& j, const char* key, const std::string& field) {
  if (!j.contains(key)) throw ValidationError(field, field + " is required");
  if (!j.at(key).is_number()) throw ValidationError(field, field + " must be a number");
  return j.at(key).get<double>();
}

std::vector<session::Condition> parse_conditions(const json& req) {
  if (!req.contains("conditions") || !req.at("conditions").is_array() || req.at("conditions").empty()) {
    throw ValidationError("conditions", "conditions must be a non-empty array");
  }
  std::vector<session::Condition> out;
  const auto& arr = req.at("conditions");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string base = "conditions[" + std::to_string(i) + "]";
    const auto& c = arr[i];
    expect_keys(c, {"device_label", "light_level"}, base);
    session::Condition cond;
    cond.device_label = get_string(c, "device_label", base + ".device_label");
    if (cond.device_label.empty()) throw ValidationError(base + ".device_label", "device label must be non-empty");
    if (!c.contains("light_level")) throw ValidationError(base + ".light_level", "light_level is required");
    const auto& l = c.at("light_level");
    expect_keys(l, {"label", "illuminance_lux"}, base + ".light_level");
    cond.light_level.label = get_string(l, "label", base + ".light_level.label");
    if (cond.light_level.label.empty()) {
      throw ValidationError(base + ".light_level.label", "light label must be non-empty");
    }
    cond.light_level.illuminance_lux = get_number(l, "illuminance_lux", base + ".light_level.illuminance_lux");
    if (!(cond.light_level.illuminance_lux > 0.0) || !std::isfinite(cond.light_level.illuminance_lux)) {
      throw ValidationError(base + ".light_level.illuminance_lux", "illuminance must be a positive number of lux");
    }
    out.push_back(std::move(cond));
  }
  return out;
}

session::Response parse_response(const json& r) {
  if (!r.is_object() || r.size() != 1) {
    throw ValidationError("response", "response must hold exactly one of orientation, letters, move, submit, "
                                      "acknowledge_rest");
  }
  const auto& [key, value] = *r.items().begin();
  if (key == "orientation") {
    if (!value.is_string()) throw ValidationError("response.orientation", "orientation must be a string");
    try {
      return session::OrientationAnswer{session::orientation_from_string(value.get<std::string>())};
    } catch (const ValidationError&) {
      throw ValidationError("response.orientation", "orientation must be up, down, left or right");
    }
  }
  if (key == "letters") {
    if (!value.is_string()) throw ValidationError("response.letters", "letters must be a string");
    return session::LetterAnswer{value.get<std::string>()};
  }
  if (key == "move") {
    expect_keys(value, {"group", "from", "to"}, "response.move");
    auto integer = [&](const char* k) {
      if (!value.contains(k) || !value.at(k).is_number_integer()) {
        throw ValidationError(std::string("response.move.") + k, std::string(k) + " must be an integer");
      }
      return value.at(k).get<int>();
    };
    return session::HueMove{integer("group"), integer("from"), integer("to")};
  }
  if (key == "submit") {
    if (value != true) throw ValidationError("response.submit", "submit must be true");
    return session::HueSubmit{};
  }
  if (key == "acknowledge_rest") {
    if (value != true) throw ValidationError("response.acknowledge_rest", "acknowledge_rest must be true");
    return session::RestAck{};
  }
  throw ValidationError("response." + key, "unknown field: response." + key);
}

std::string hex_color(const hue::Rgb& c) {
  auto byte = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", byte(c.r), byte(c.g), byte(c.b));
  return buf;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto pos = path.find('/', start);
    const auto piece = path.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!piece.empty()) parts.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string query_param(std::string_view query, std::string_view name) {
  std::size_t start = 0;
  while (start < query.size()) {
    auto end = query.find('&', start);
    if (end == std::string_view::npos) end = query.size();
    const auto item = query.substr(start, end - start);
    const auto eq = item.find('=');
    if (item.substr(0, eq) == name) return eq == std::string_view::npos ? "" : std::string(item.substr(eq + 1));
    start = end + 1;
  }
  return {};
}

}  // namespace

std::filesystem::path resolve_data_dir(const std::optional<std::filesystem::path>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(std::string(kDataDirEnv).c_str()); env && *env) return env;
  return "visbench-data";
}

struct BenchService::Live {
  std::mutex mutex;
  SessionMeta meta;
  std::optional<session::SessionRunner> runner;
};

BenchService::BenchService(ServiceConfig config, std::vector<calibration::CalibrationProfile> calibrations,
                           session::Clock& clock)
    : config_(std::move(config)), calibrations_(std::move(calibrations)), clock_(&clock), store_(config_.data_dir) {
  if (calibrations_.empty()) calibrations_.push_back(calibration::reference_profile());
  if (config_.snapshot_interval == 0) config_.snapshot_interval = 50;
  for (auto& stored : store_.load_all()) {
    const std::string id = stored.meta.session_id;
    for (auto& w : stored.warnings) load_warnings_.push_back(std::move(w));
    try {
      auto live = restore_live(std::move(stored));
      if (!live->meta.idempotency_key.empty()) idempotency_[live->meta.idempotency_key] = id;
      sessions_[id] = std::move(live);
    } catch (const Error& e) {
      load_warnings_.push_back("session " + id + " not loaded: " + e.what());
    }
  }
}

BenchService::~BenchService() = default;

std::shared_ptr<BenchService::Live> BenchService::restore_live(StoredSession stored) {
  auto live = std::make_shared<Live>();
  live->meta = std::move(stored.meta);
  if (live->meta.status != SessionStatus::Created) attach_runner(*live, &stored.records);
  return live;
}

void BenchService::attach_runner(Live& live, const std::vector<session::TrialRecord>* records) {
  const std::string id = live.meta.session_id;
  auto sink = [this, id](const session::TrialRecord& rec) { store_.append_record(id, rec); };
  if (records) {
    live.runner.emplace(session::SessionRunner::restore(live.meta.plan, *records, *clock_, sink));
  } else {
    live.runner.emplace(live.meta.plan, *clock_, sink);
  }
}

std::string BenchService::new_session_id() {
  static constexpr char digits[] = "0123456789abcdef";
  std::lock_guard lock(id_mutex_);
  std::random_device rd;
  std::string id;
  for (int i = 0; i < 32; ++i) id += digits[rd() % 16];
  return id;
}

std::shared_ptr<BenchService::Live> BenchService::find(const std::string& id) {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "not_found", "no session with id " + id, "session_id");
  return it->second;
}

HttpResponse BenchService::handle(std::string_view method, std::string_view target, std::string_view body) {
  const auto qpos = target.find('?');
  const auto path = target.substr(0, qpos);
  const auto query = qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1);
  try {
    return route(method, path, query, body);
  } catch (const ApiError& e) {
    return error_response(e.status(), e.code(), e.what(), e.field(), e.extra());
  } catch (const session::HueTooEarly& e) {
    return error_response(409, e.code(), e.what(), {}, json{{"remaining_seconds", e.remaining_seconds()}});
  } catch (const ValidationError& e) {
    return error_response(400, e.code(), e.what(), e.field());
  } catch (const StateError& e) {
    return error_response(409, e.code(), e.what());
  } catch (const DomainError& e) {
    return error_response(422, e.code(), e.what());
  } catch (const IoError& e) {
    return error_response(500, e.code(), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "validation_error", std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

HttpResponse BenchService::route(std::string_view method, std::string_view path, std::string_view query,
                                 std::string_view body) {
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "v1") throw ApiError(404, "not_found", "unknown endpoint");
  auto expect = [&](std::string_view m) {
    if (method != m) throw ApiError(405, "method_not_allowed", std::string(method) + " not allowed here");
  };
  if (parts.size() == 2 && parts[1] == "health") {
    expect("GET");
    return ok(200, json{{"status", "ok"}, {"artifact_version", session::kArtifactVersion}});
  }
  if (parts.size() == 2 && parts[1] == "calibrations") {
    expect("GET");
    json list = json::array();
    for (const auto& c : calibrations_) list.push_back(c);
    return ok(200, json{{"calibrations", list}});
  }
  if (parts.size() >= 2 && parts[1] == "sessions") {
    if (parts.size() == 2) {
      if (method == "POST") return create_session(parse_body(body));
      expect("GET");
      return list_sessions();
    }
    const std::string& id = parts[2];
    if (parts.size() == 3) {
      expect("GET");
      return describe(id);
    }
    if (parts.size() == 4) {
      const std::string& action = parts[3];
      if (action == "start" || action == "suspend" || action == "resume") {
        expect("POST");
        const json req = parse_body(body);
        expect_keys(req, {"schema_version"}, "");
        return transition(id, action);
      }
      if (action == "stimulus") {
        expect("GET");
        return stimulus(id);
      }
      if (action == "responses") {
        expect("POST");
        return submit(id, parse_body(body));
      }
      if (action == "results") {
        expect("GET");
        return results(id);
      }
      if (action == "export") {
        expect("GET");
        return export_session(id, query);
      }
    }
  }
  throw ApiError(404, "not_found", "unknown endpoint " + std::string(path));
}

HttpResponse BenchService::create_session(const json& req) {
  expect_keys(req,
              {"schema_version", "idempotency_key", "participant_id", "participant_index", "conditions", "tests",
               "seed", "calibration_id", "options", "counterbalance"},
              "");
  require_schema_version(req);
  const std::string key = get_string(req, "idempotency_key", "idempotency_key", false);
  json fingerprint_src = req;
  fingerprint_src.erase("idempotency_key");
  const std::string fingerprint = fingerprint_src.dump();

  if (!key.empty()) {
    std::shared_lock lock(map_mutex_);
    if (auto it = idempotency_.find(key); it != idempotency_.end()) {
      const auto live = sessions_.at(it->second);
      std::lock_guard session_lock(live->mutex);
      if (live->meta.request_fingerprint != fingerprint) {
        throw ApiError(409, "idempotency_conflict", "idempotency_key was already used for a different request",
                       "idempotency_key");
      }
      return ok(200, json{{"session_id", live->meta.session_id},
                          {"status", to_string(live->meta.status)},
                          {"plan", live->meta.plan},
                          {"created", false}});
    }
  }

  const auto conditions = parse_conditions(req);
  std::vector<session::TestKind> tests = {session::TestKind::Acuity, session::TestKind::Contrast,
                                          session::TestKind::Hue};
  if (req.contains("tests")) {
    if (!req.at("tests").is_array()) throw ValidationError("tests", "tests must be an array");
    tests.clear();
    for (const auto& t : req.at("tests")) {
      if (!t.is_string()) throw ValidationError("tests", "tests must be strings");
      try {
        tests.push_back(session::test_kind_from_string(t.get<std::string>()));
      } catch (const ValidationError&) {
        throw ValidationError("tests", "unknown test '" + t.get<std::string>() + "'");
      }
    }
  }
  int index = 0;
  if (req.contains("participant_index")) {
    if (!req.at("participant_index").is_number_integer() || req.at("participant_index").get<int>() < 0) {
      throw ValidationError("participant_index", "participant_index must be a non-negative integer");
    }
    index = req.at("participant_index").get<int>();
  }
  std::uint64_t seed = 0;
  if (req.contains("seed")) {
    if (!req.at("seed").is_number_unsigned()) throw ValidationError("seed", "seed must be a non-negative integer");
    seed = req.at("seed").get<std::uint64_t>();
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  const calibration::CalibrationProfile* profile = &calibrations_.front();
  if (req.contains("calibration_id")) {
    const std::string cid = get_string(req, "calibration_id", "calibration_id");
    profile = nullptr;
    for (const auto& c : calibrations_) {
      if (c.id == cid) profile = &c;
    }
    if (!profile) {
      throw ApiError(422, "unknown_calibration", "calibration profile '" + cid + "' is not known to this server",
                     "calibration_id");
    }
  }
  session::SessionOptions options;
  if (req.contains("options")) options = req.at("options").get<session::SessionOptions>();
  bool counterbalance = true;
  if (req.contains("counterbalance")) {
    if (!req.at("counterbalance").is_boolean()) throw ValidationError("counterbalance", "must be a boolean");
    counterbalance = req.at("counterbalance").get<bool>();
  }
  const std::string participant = get_string(req, "participant_id", "participant_id", false);

  session::SessionPlan plan;
  if (counterbalance) {
    plan = session::build_plan(index, conditions, tests, seed, *profile, options, participant);
  } else {
    plan.participant_index = index;
    plan.participant_id = participant.empty() ? "P" + std::to_string(index + 1) : participant;
    plan.conditions = conditions;
    plan.test_order = tests;
    plan.seed = seed;
    plan.calibration = *profile;
    plan.options = options;
    plan.validate();
  }

  auto live = std::make_shared<Live>();
  live->meta.session_id = new_session_id();
  live->meta.idempotency_key = key;
  live->meta.request_fingerprint = fingerprint;
  live->meta.status = SessionStatus::Created;
  live->meta.plan = std::move(plan);
  live->meta.created_ms = clock_->wall_clock_ms();

  std::unique_lock lock(map_mutex_);
  if (!key.empty()) {
    // Lost a race against an identical create.
    if (auto it = idempotency_.find(key); it != idempotency_.end()) {
      lock.unlock();
      return create_session(req);
    }
  }
  store_.write_meta(live->meta);
  if (!key.empty()) idempotency_[key] = live->meta.session_id;
  sessions_[live->meta.session_id] = live;
  return ok(201, json{{"session_id", live->meta.session_id},
                      {"status", to_string(live->meta.status)},
                      {"plan", live->meta.plan},
                      {"created", true}});
}

HttpResponse BenchService::list_sessions() {
  std::vector<std::shared_ptr<Live>> all;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& [id, live] : sessions_) all.push_back(live);
  }
  json list = json::array();
  for (const auto& live : all) {
    std::lock_guard lock(live->mutex);
    list.push_back(json{{"session_id", live->meta.session_id},
                        {"participant_id", live->meta.plan.participant_id},
                        {"status", to_string(live->meta.status)}});
  }
  return ok(200, json{{"sessions", list}});
}

json BenchService::progress_json(Live& live) {
  json p{{"status", to_string(live.meta.status)}};
  std::size_t total = live.meta.plan.conditions.size() * live.meta.plan.test_order.size();
  p["total_tests"] = total;
  if (!live.runner) {
    p["completed_tests"] = 0;
    p["task_index"] = 0;
    p["current_test"] = nullptr;
    p["condition_index"] = nullptr;
    p["trials_in_task"] = 0;
    p["next_sequence"] = nullptr;
    return p;
  }
  const auto& runner = *live.runner;
  const auto result = runner.result();
  std::size_t done = 0;
  for (const auto& c : result.conditions) {
    for (const auto& t : c.tests) done += t.complete ? 1 : 0;
  }
  p["completed_tests"] = done;
  p["task_index"] = runner.current_task();
  p["task_count"] = runner.task_count();
  if (runner.complete()) {
    p["current_test"] = nullptr;
    p["condition_index"] = nullptr;
    p["trials_in_task"] = 0;
    p["next_sequence"] = nullptr;
    return p;
  }
  const auto prompt = live.runner->prompt();
  p["current_test"] = prompt.kind == session::PromptKind::Rest ? json("rest") : json(session::to_string(prompt.test));
  p["condition_index"] = prompt.condition_index;
  p["trials_in_task"] = runner.active_staircase() ? runner.active_staircase()->trials().size() : 0;
  p["next_sequence"] = prompt.sequence;
  return p;
}

HttpResponse BenchService::describe(const std::string& id) {
  auto live = find(id);
  std::lock_guard lock(live->mutex);
  return ok(200, json{{"session_id", id}, {"plan", live->meta.plan}, {"progress", progress_json(*live)}});
}

HttpResponse BenchService::transition(const std::string& id, std::string_view action) {
  auto live = find(id);
  std::lock_guard lock(live->mutex);
  auto& meta = live->meta;
  const auto invalid = [&] {
    return ApiError(409, "invalid_transition",
                    "cannot " + std::string(action) + " a session that is " + std::string(to_string(meta.status)));
  };
  SessionMeta next = meta;
  if (action == "start") {
    if (meta.status != SessionStatus::Created) throw invalid();
    next.status = SessionStatus::Running;
    store_.write_meta(next);
    attach_runner(*live, nullptr);
    if (live->runner->complete()) next.status = SessionStatus::Complete;
  } else if (action == "suspend") {
    if (meta.status != SessionStatus::Running) throw invalid();
    next.status = SessionStatus::Suspended;
  } else {
    if (meta.status != SessionStatus::Suspended) throw invalid();
    next.status = SessionStatus::Running;
  }
  store_.write_meta(next);
  meta = std::move(next);
  return ok(200, json{{"session_id", id}, {"progress", progress_json(*live)}});
}

HttpResponse BenchService::stimulus(const std::string& id) {
  auto live = find(id);
  std::lock_guard lock(live->mutex);
  if (live->meta.status == SessionStatus::Complete) {
    throw ApiError(409, "session_complete", "all tests are complete; fetch the results", {},
                   json{{"results", "/v1/sessions/" + id + "/results"}});
  }
  if (live->meta.status != SessionStatus::Running) {
    throw ApiError(409, "not_running", "session is " + std::string(to_string(live->meta.status)));
  }
  const auto prompt = live->runner->prompt();
  json s = prompt;
  if (prompt.kind == session::PromptKind::HueBoard) {
    static const hue::CapSet caps = hue::generate_cap_set();
    json colors = json::array();
    for (const auto& group : prompt.arrangement->groups()) {
      json g = json::array();
      for (int cap : group) g.push_back(hex_color(caps.cap(cap).color));
      colors.push_back(std::move(g));
    }
    s["colors"] = std::move(colors);
    s["hue_min_seconds"] = live->meta.plan.options.hue_min_seconds;
  }
  if (prompt.kind != session::PromptKind::Rest && prompt.kind != session::PromptKind::Done) {
    s["condition"] = live->meta.plan.conditions[prompt.condition_index];
  }
  return ok(200, json{{"session_id", id}, {"stimulus", s}});
}

HttpResponse BenchService::submit(const std::string& id, const json& req) {
  expect_keys(req, {"schema_version", "sequence", "response"}, "");
  require_schema_version(req);
  if (!req.contains("sequence") || !req.at("sequence").is_number_unsigned()) {
    throw ValidationError("sequence", "sequence must be a positive integer");
  }
  const auto sequence = req.at("sequence").get<std::uint64_t>();
  if (!req.contains("response")) throw ValidationError("response", "response is required");
  const session::Response response = parse_response(req.at("response"));

  auto live = find(id);
  std::lock_guard lock(live->mutex);
  if (live->runner) {
    const auto& records = live->runner->records();
    if (sequence >= 1 && sequence <= records.size()) {
      const auto& rec = records[sequence - 1];
      if (rec.kind != session::RecordKind::Begin && rec.response == session::response_to_string(response)) {
        return ok(200, json{{"session_id", id},
                            {"accepted", true},
                            {"duplicate", true},
                            {"sequence", sequence},
                            {"correct", rec.correct ? json(*rec.correct) : json(nullptr)},
                            {"progress", progress_json(*live)}});
      }
    }
  }
  if (live->meta.status == SessionStatus::Complete) {
    throw ApiError(409, "session_complete", "all tests are complete; fetch the results", {},
                   json{{"results", "/v1/sessions/" + id + "/results"}});
  }
  if (live->meta.status != SessionStatus::Running) {
    throw ApiError(409, "not_running", "session is " + std::string(to_string(live->meta.status)));
  }
  auto& runner = *live->runner;
  const auto prompt = runner.prompt();
  if (sequence != prompt.sequence) {
    throw ApiError(409, "stale_sequence", "sequence does not match the pending stimulus; fetch it again", "sequence",
                   json{{"expected_sequence", prompt.sequence}});
  }
  const std::size_t task_before = runner.current_task();
  session::TrialRecord accepted;
  try {
    accepted = runner.apply(response);
  } catch (const IoError&) {
    // The in-memory runner may be ahead of the log; rebuild it from disk.
    auto stored = store_.load(id);
    live->runner.reset();
    attach_runner(*live, &stored.records);
    throw;
  }
  if (runner.records().size() % config_.snapshot_interval == 0) {
    try {
      store_.write_snapshot(id, runner.records());
    } catch (const IoError& e) {
      std::cerr << "snapshot failed for session " << id << ": " << e.what() << "\n";
    }
  }
  if (runner.complete()) {
    SessionMeta next = live->meta;
    next.status = SessionStatus::Complete;
    store_.write_meta(next);
    live->meta = std::move(next);
  }
  return ok(200, json{{"session_id", id},
                      {"accepted", true},
                      {"duplicate", false},
                      {"sequence", accepted.sequence},
                      {"correct", accepted.correct ? json(*accepted.correct) : json(nullptr)},
                      {"task_complete", runner.current_task() != task_before},
                      {"progress", progress_json(*live)}});
}

HttpResponse BenchService::results(const std::string& id) {
  auto live = find(id);
  std::lock_guard lock(live->mutex);
  if (!live->runner) {
    return ok(200, json{{"session_id", id},
                        {"status", to_string(live->meta.status)},
                        {"empty", true},
                        {"result", nullptr}});
  }
  const auto result = live->runner->result();
  return ok(200, json{{"session_id", id},
                      {"status", to_string(live->meta.status)},
                      {"empty", !result.any_complete()},
                      {"result", result}});
}

HttpResponse BenchService::export_session(const std::string& id, std::string_view query) {
  auto live = find(id);
  std::lock_guard lock(live->mutex);
  std::string format = query_param(query, "format");
  if (format.empty()) format = "structured";
  const std::vector<session::TrialRecord> none;
  const auto& records = live->runner ? live->runner->records() : none;
  if (format == "structured") {
    session::SessionDocument doc{live->meta.plan, records, std::string(to_string(live->meta.status))};
    return HttpResponse{200, json::parse(session::export_structured(doc)), std::nullopt, "application/json"};
  }
  if (format == "tabular") {
    return HttpResponse{200, nullptr, session::export_tabular(records), "text/csv"};
  }
  throw ValidationError("format", "format must be structured or tabular");
}

// ---------------------------------------------------------------------------

HttpServer::HttpServer(BenchService& service, std::optional<std::filesystem::path> static_dir)
    : service_(&service), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::string target = req.path;
    if (!req.params.empty()) {
      target += '?';
      bool first = true;
      for (const auto& [k, v] : req.params) {
        if (!first) target += '&';
        first = false;
        target += k + "=" + v;
      }
    }
    const HttpResponse out = service_->handle(req.method, target, req.body);
    res.status = out.status;
    if (out.raw_body) {
      res.set_content(*out.raw_body, out.content_type);
    } else {
      res.set_content(out.body.dump(), "application/json");
    }
  };
  const std::string api = R"(/v1/.*)";
  server_->Get(api, handler);
  server_->Post(api, handler);
  server_->Put(api, handler);
  server_->Delete(api, handler);
  if (static_dir) {
    if (!server_->set_mount_point("/", static_dir->string())) {
      throw IoError("static directory not found: " + static_dir->string());
    }
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace visbench::service
