#pragma once

// Benchmark session orchestration.
//
// A session runs every (condition x test) task of a plan in order, with an
// operator-acknowledged rest between conditions. The runner is step driven:
// `prompt()` describes what to show next, `apply()` consumes one operator
// response. Every accepted response becomes an append-only TrialRecord and
// the full runner state can be rebuilt from the plan plus those records.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "visbench/calibration.hpp"
#include "visbench/errors.hpp"
#include "visbench/hue.hpp"
#include "visbench/metrics.hpp"
#include "visbench/staircase.hpp"

namespace visbench::session {

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kArtifactVersion = "visbench 1.0.0";
inline constexpr std::string_view kSloanLetters = "CDHKNORSVZ";

enum class TestKind { Acuity, Contrast, Hue };
std::string_view to_string(TestKind kind);
TestKind test_kind_from_string(std::string_view name);

enum class Orientation { Up, Down, Left, Right };
std::string_view to_string(Orientation o);
Orientation orientation_from_string(std::string_view name);

struct LightLevel {
  std::string label;
  double illuminance_lux = 0.0;
  bool operator==(const LightLevel&) const = default;
};

struct Condition {
  std::string device_label;
  LightLevel light_level;

  void validate() const;
  bool operator==(const Condition&) const = default;
};

enum class ContrastRule { BothLetters, EitherLetter };

struct SessionOptions {
  double hue_min_seconds = 480.0;
  ContrastRule contrast_rule = ContrastRule::BothLetters;
  bool rest_between_conditions = true;
  bool operator==(const SessionOptions&) const = default;
};

struct SessionPlan {
  std::string participant_id;
  int participant_index = 0;
  std::vector<Condition> conditions;  // scheduled order
  std::vector<TestKind> test_order;
  std::uint64_t seed = 0;
  calibration::CalibrationProfile calibration;
  SessionOptions options;

  void validate() const;
  bool operator==(const SessionPlan&) const = default;
};

/// Williams balanced square for even n (every ordered adjacency occurs
/// once), cyclic square for odd n. Row r is the order for index r.
std::vector<std::vector<int>> latin_square_orders(int n);

/// Condition order is row (index mod n) of the condition square, test
/// order row (index mod m) of the test square.
SessionPlan build_plan(int participant_index, const std::vector<Condition>& conditions,
                       const std::vector<TestKind>& tests, std::uint64_t seed,
                       const calibration::CalibrationProfile& calibration,
                       SessionOptions options = {}, std::string participant_id = {});

// ---------------------------------------------------------------------------
// Clocks

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double monotonic_seconds() = 0;
  virtual std::int64_t wall_clock_ms() = 0;
};

class SystemClock final : public Clock {
 public:
  double monotonic_seconds() override;
  std::int64_t wall_clock_ms() override;
};

/// Test and simulation clock; time moves only through advance().
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t wall_start_ms = 1'700'000'000'000) : wall_start_ms_(wall_start_ms) {}
  double monotonic_seconds() override { return now_; }
  std::int64_t wall_clock_ms() override {
    return wall_start_ms_ + static_cast<std::int64_t>(now_ * 1000.0);
  }
  void advance(double seconds) { now_ += seconds; }

 private:
  double now_ = 0.0;
  std::int64_t wall_start_ms_;
};

// ---------------------------------------------------------------------------
// Prompts and responses

enum class PromptKind { Trial, HueBoard, Rest, Done };

/// What the operator console should display next. `sequence` is the
/// sequence number the answering response must carry.
struct Prompt {
  PromptKind kind = PromptKind::Done;
  std::uint64_t sequence = 0;
  std::size_t task_index = 0;
  std::size_t condition_index = 0;
  TestKind test = TestKind::Acuity;
  double level = 0.0;
  // Acuity
  std::optional<Orientation> orientation;
  std::optional<double> pixel_height;
  // Contrast
  std::optional<std::string> letters;
  std::optional<double> grayscale;
  // Hue
  std::optional<hue::HueArrangement> arrangement;
  double elapsed_seconds = 0.0;
  double remaining_seconds = 0.0;
};

struct OrientationAnswer {
  Orientation orientation;
};
struct LetterAnswer {
  std::string letters;
};
struct HueMove {
  int group = 1;
  int from_position = 1;
  int to_position = 1;
};
struct HueSubmit {};
struct RestAck {};

using Response = std::variant<OrientationAnswer, LetterAnswer, HueMove, HueSubmit, RestAck>;

/// Canonical text forms used in trial logs: "up", "CD", "move:2:3:5",
/// "submit", "ack".
std::string response_to_string(const Response& response);
Response response_from_string(std::string_view text);

// ---------------------------------------------------------------------------
// Records and results

enum class RecordKind { Begin, Response, Move, Submit, Rest };
std::string_view to_string(RecordKind kind);
RecordKind record_kind_from_string(std::string_view name);

struct TrialRecord {
  std::uint64_t sequence = 0;
  RecordKind kind = RecordKind::Response;
  std::string participant_id;
  std::size_t condition_index = 0;
  Condition condition;
  TestKind test = TestKind::Acuity;
  std::optional<double> level;
  std::string stimulus;
  std::string response;
  std::optional<bool> correct;
  std::int64_t wall_clock_ms = 0;
  double monotonic_s = 0.0;

  bool operator==(const TrialRecord&) const = default;
};

struct TestOutcome {
  TestKind test = TestKind::Acuity;
  bool complete = false;
  std::size_t trials = 0;
  double duration_s = 0.0;
  std::optional<double> threshold_level;
  std::optional<metrics::AcuityResult> acuity;
  std::optional<metrics::ContrastResult> contrast;
  std::optional<hue::TesReport> tes;
  std::optional<metrics::PerceptionBand> band;

  /// Compares measurement fields only (ignores duration).
  bool same_measurement(const TestOutcome& other) const;
};

struct ConditionResult {
  Condition condition;
  std::vector<TestOutcome> tests;  // in plan test order
};

struct SessionResult {
  std::string artifact_version{kArtifactVersion};
  SessionPlan plan;
  bool complete = false;
  std::vector<ConditionResult> conditions;  // in plan condition order

  bool any_complete() const;
  const TestOutcome* find(std::size_t condition_index, TestKind test) const;
};

// ---------------------------------------------------------------------------
// Errors surfaced to the response source

/// Hue submission before the minimum arrangement time.
class HueTooEarly : public Error {
 public:
  explicit HueTooEarly(double remaining_seconds)
      : Error("hue_minimum_time", "hue arrangement cannot be submitted yet"),
        remaining_seconds_(remaining_seconds) {}
  double remaining_seconds() const noexcept { return remaining_seconds_; }

 private:
  double remaining_seconds_;
};

// ---------------------------------------------------------------------------
// Runner

class SessionRunner {
 public:
  using RecordSink = std::function<void(const TrialRecord&)>;

  SessionRunner(SessionPlan plan, Clock& clock, RecordSink sink = {});

  /// Rebuilds the runner by replaying `records` (which must have been
  /// produced by a runner with the same plan). New timestamps continue from
  /// the last replayed record.
  static SessionRunner restore(SessionPlan plan, const std::vector<TrialRecord>& records, Clock& clock,
                               RecordSink sink = {});

  const SessionPlan& plan() const noexcept { return plan_; }
  const std::vector<TrialRecord>& records() const noexcept { return records_; }
  bool complete() const noexcept { return task_ >= tasks_.size(); }
  std::size_t task_count() const noexcept { return tasks_.size(); }
  std::size_t current_task() const noexcept { return task_; }

  /// Current pending prompt; identical across calls until apply() succeeds.
  Prompt prompt();

  /// Applies one response to the pending prompt. The record is handed to
  /// the sink before this returns. Throws ValidationError for a response
  /// that does not fit the prompt (or an illegal move), HueTooEarly for an
  /// early hue submission and StateError once complete.
  const TrialRecord& apply(const Response& response);

  /// Partial results are allowed.
  SessionResult result() const;

  /// Staircase state of the active task, if it is a staircase test.
  const staircase::StaircaseState* active_staircase() const;
  /// Arrangement of the active task, if it is the hue test.
  const hue::HueArrangement* active_arrangement() const;

 private:
  struct Task {
    enum class Kind { Test, Rest } kind = Kind::Test;
    std::size_t condition_index = 0;
    TestKind test = TestKind::Acuity;
  };
  struct TaskState {
    std::optional<staircase::StaircaseState> staircase;
    std::optional<hue::HueArrangement> arrangement;
    std::optional<hue::TesReport> tes;
    double begin_s = 0.0;
    double end_s = 0.0;
    bool begun = false;
    bool complete = false;
  };

  double now();
  TrialRecord make_record(RecordKind kind, const Task& task) const;
  void append(TrialRecord record, bool replaying);
  void begin_task(bool replaying, std::optional<double> at = std::nullopt);
  void advance_task(bool replaying, double at);
  Prompt build_prompt(double now_s) const;
  const TrialRecord& apply_at(const Response& response, double now_s, std::int64_t wall_ms, bool replaying);
  TestOutcome outcome_for(std::size_t task_index) const;

  SessionPlan plan_;
  Clock* clock_;
  RecordSink sink_;
  std::vector<Task> tasks_;
  std::vector<TaskState> states_;
  std::size_t task_ = 0;
  std::vector<TrialRecord> records_;
  double clock_origin_ = 0.0;
  double time_base_ = 0.0;
  std::optional<std::int64_t> replay_wall_ms_;
  std::optional<double> replay_time_;
};

// ---------------------------------------------------------------------------
// Response sources and drivers

class ResponseSource {
 public:
  virtual ~ResponseSource() = default;
  /// Next response for `prompt`; nullopt means the source disconnected.
  virtual std::optional<Response> respond(const Prompt& prompt) = 0;
  virtual void on_accepted(const Prompt&, const TrialRecord&) {}
  virtual void on_rejected(const Prompt&, const Error&) {}
};

/// Replays a fixed response list, then disconnects. A rejected response is
/// offered again; if a ManualClock is attached it is advanced by
/// `seconds_per_response` after every accepted response and by the
/// remaining time after an early hue submission.
class ScriptedSource final : public ResponseSource {
 public:
  explicit ScriptedSource(std::vector<Response> responses, ManualClock* clock = nullptr,
                          double seconds_per_response = 0.0);
  std::optional<Response> respond(const Prompt& prompt) override;
  void on_accepted(const Prompt&, const TrialRecord&) override;
  void on_rejected(const Prompt&, const Error& error) override;
  std::size_t consumed() const noexcept { return next_; }

 private:
  std::vector<Response> responses_;
  std::size_t next_ = 0;
  ManualClock* clock_;
  double seconds_per_response_;
};

/// Responses carried by the accepted records of a session, in order.
std::vector<Response> responses_from_records(const std::vector<TrialRecord>& records);

enum class RunStatus { Complete, Suspended, TaskComplete };

/// Feeds prompts to `source` until the session completes (Complete), the
/// source disconnects (Suspended) or, with `single_task`, the active task
/// finishes (TaskComplete).
RunStatus drive(SessionRunner& runner, ResponseSource& source, bool single_task = false);

struct TestRunOutput {
  TestOutcome outcome;
  std::vector<TrialRecord> records;
  RunStatus status = RunStatus::Suspended;
};

/// Runs one test of one planned condition in isolation.
TestRunOutput run_test(const SessionPlan& plan, std::size_t condition_index, TestKind test,
                       ResponseSource& source, Clock& clock);

}  // namespace visbench::session
