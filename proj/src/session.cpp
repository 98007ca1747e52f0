#include "visbench/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "visbench/random.hpp"

namespace visbench::session {
namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string arrangement_snapshot(const hue::HueArrangement& arrangement) {
  std::ostringstream out;
  bool first_group = true;
  for (const auto& group : arrangement.groups()) {
    if (!first_group) out << '|';
    first_group = false;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (i) out << ' ';
      out << group[i];
    }
  }
  return out.str();
}

std::string format_level(double level) {
  std::ostringstream out;
  out.precision(17);
  out << level;
  return out.str();
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::Acuity: return "acuity";
    case TestKind::Contrast: return "contrast";
    case TestKind::Hue: return "hue";
  }
  return "unknown";
}

TestKind test_kind_from_string(std::string_view name) {
  if (name == "acuity") return TestKind::Acuity;
  if (name == "contrast") return TestKind::Contrast;
  if (name == "hue") return TestKind::Hue;
  throw ValidationError("test", "unknown test kind: " + std::string(name));
}

std::string_view to_string(Orientation o) {
  switch (o) {
    case Orientation::Up: return "up";
    case Orientation::Down: return "down";
    case Orientation::Left: return "left";
    case Orientation::Right: return "right";
  }
  return "unknown";
}

Orientation orientation_from_string(std::string_view name) {
  if (name == "up") return Orientation::Up;
  if (name == "down") return Orientation::Down;
  if (name == "left") return Orientation::Left;
  if (name == "right") return Orientation::Right;
  throw ValidationError("orientation", "unknown orientation: " + std::string(name));
}

std::string_view to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::Begin: return "begin";
    case RecordKind::Response: return "response";
    case RecordKind::Move: return "move";
    case RecordKind::Submit: return "submit";
    case RecordKind::Rest: return "rest";
  }
  return "unknown";
}

RecordKind record_kind_from_string(std::string_view name) {
  if (name == "begin") return RecordKind::Begin;
  if (name == "response") return RecordKind::Response;
  if (name == "move") return RecordKind::Move;
  if (name == "submit") return RecordKind::Submit;
  if (name == "rest") return RecordKind::Rest;
  throw ValidationError("kind", "unknown record kind: " + std::string(name));
}

void Condition::validate() const {
  if (device_label.empty()) throw ValidationError("device_label", "device label must be non-empty");
  if (light_level.label.empty()) throw ValidationError("light_level.label", "light label must be non-empty");
  if (!(light_level.illuminance_lux > 0.0) || !std::isfinite(light_level.illuminance_lux)) {
    throw ValidationError("light_level.illuminance_lux", "illuminance must be a positive number of lux");
  }
}

void SessionPlan::validate() const {
  if (participant_id.empty()) throw ValidationError("participant_id", "participant id must be non-empty");
  if (participant_index < 0) throw ValidationError("participant_index", "participant index must be >= 0");
  if (conditions.empty()) throw ValidationError("conditions", "at least one condition is required");
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    conditions[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (conditions[j] == conditions[i]) throw ValidationError("conditions", "duplicate condition");
    }
  }
  if (test_order.empty()) throw ValidationError("tests", "at least one test is required");
  std::vector<TestKind> sorted = test_order;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("tests", "each test may appear only once");
  }
  if (!(options.hue_min_seconds >= 0.0)) {
    throw ValidationError("options.hue_min_seconds", "hue minimum time must be non-negative");
  }
  calibration.validate();
}

std::vector<std::vector<int>> latin_square_orders(int n) {
  if (n < 1) throw ValidationError("n", "latin square needs at least one item");
  std::vector<int> first(static_cast<std::size_t>(n));
  if (n % 2 == 0) {
    // Williams: 0, 1, n-1, 2, n-2, ...
    int low = 1, high = n - 1;
    first[0] = 0;
    for (int j = 1; j < n; ++j) first[static_cast<std::size_t>(j)] = (j % 2 == 1) ? low++ : high--;
  } else {
    for (int j = 0; j < n; ++j) first[static_cast<std::size_t>(j)] = j;
  }
  std::vector<std::vector<int>> rows;
  for (int r = 0; r < n; ++r) {
    std::vector<int> row(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = (first[static_cast<std::size_t>(j)] + r) % n;
    rows.push_back(std::move(row));
  }
  return rows;
}

SessionPlan build_plan(int participant_index, const std::vector<Condition>& conditions,
                       const std::vector<TestKind>& tests, std::uint64_t seed,
                       const calibration::CalibrationProfile& calibration, SessionOptions options,
                       std::string participant_id) {
  if (participant_index < 0) throw ValidationError("participant_index", "participant index must be >= 0");
  if (conditions.empty()) throw ValidationError("conditions", "at least one condition is required");
  if (tests.empty()) throw ValidationError("tests", "at least one test is required");
  SessionPlan plan;
  plan.participant_index = participant_index;
  plan.participant_id = participant_id.empty() ? "P" + std::to_string(participant_index + 1) : std::move(participant_id);
  const auto condition_rows = latin_square_orders(static_cast<int>(conditions.size()));
  for (int idx : condition_rows[static_cast<std::size_t>(participant_index) % conditions.size()]) {
    plan.conditions.push_back(conditions[static_cast<std::size_t>(idx)]);
  }
  const auto test_rows = latin_square_orders(static_cast<int>(tests.size()));
  for (int idx : test_rows[static_cast<std::size_t>(participant_index) % tests.size()]) {
    plan.test_order.push_back(tests[static_cast<std::size_t>(idx)]);
  }
  plan.seed = seed;
  plan.calibration = calibration;
  plan.options = options;
  plan.validate();
  return plan;
}

double SystemClock::monotonic_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::int64_t SystemClock::wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string response_to_string(const Response& response) {
  struct Visitor {
    std::string operator()(const OrientationAnswer& a) const { return std::string(to_string(a.orientation)); }
    std::string operator()(const LetterAnswer& a) const { return upper(a.letters); }
    std::string operator()(const HueMove& m) const {
      return "move:" + std::to_string(m.group) + ":" + std::to_string(m.from_position) + ":" +
             std::to_string(m.to_position);
    }
    std::string operator()(const HueSubmit&) const { return "submit"; }
    std::string operator()(const RestAck&) const { return "ack"; }
  };
  return std::visit(Visitor{}, response);
}

Response response_from_string(std::string_view text) {
  if (text == "submit") return HueSubmit{};
  if (text == "ack") return RestAck{};
  if (text.starts_with("move:")) {
    HueMove m;
    char c1 = 0, c2 = 0;
    std::istringstream in(std::string(text.substr(5)));
    if (!(in >> m.group >> c1 >> m.from_position >> c2 >> m.to_position) || c1 != ':' || c2 != ':') {
      throw ValidationError("response", "malformed move: " + std::string(text));
    }
    return m;
  }
  if (text == "up" || text == "down" || text == "left" || text == "right") {
    return OrientationAnswer{orientation_from_string(text)};
  }
  return LetterAnswer{std::string(text)};
}

bool TestOutcome::same_measurement(const TestOutcome& other) const {
  return test == other.test && complete == other.complete && trials == other.trials &&
         threshold_level == other.threshold_level && acuity == other.acuity &&
         contrast == other.contrast && tes == other.tes && band == other.band;
}

bool SessionResult::any_complete() const {
  for (const auto& c : conditions) {
    for (const auto& t : c.tests) {
      if (t.complete) return true;
    }
  }
  return false;
}

const TestOutcome* SessionResult::find(std::size_t condition_index, TestKind test) const {
  if (condition_index >= conditions.size()) return nullptr;
  for (const auto& t : conditions[condition_index].tests) {
    if (t.test == test) return &t;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

SessionRunner::SessionRunner(SessionPlan plan, Clock& clock, RecordSink sink)
    : plan_(std::move(plan)), clock_(&clock), sink_(std::move(sink)) {
  plan_.validate();
  for (std::size_t c = 0; c < plan_.conditions.size(); ++c) {
    for (TestKind t : plan_.test_order) tasks_.push_back(Task{Task::Kind::Test, c, t});
    if (plan_.options.rest_between_conditions && c + 1 < plan_.conditions.size()) {
      tasks_.push_back(Task{Task::Kind::Rest, c, plan_.test_order.back()});
    }
  }
  states_.resize(tasks_.size());
  clock_origin_ = clock_->monotonic_seconds();
  begin_task(false);
}

SessionRunner SessionRunner::restore(SessionPlan plan, const std::vector<TrialRecord>& records, Clock& clock,
                                     RecordSink sink) {
  // Construct without a live begin record, then replay.
  SessionRunner runner(std::move(plan), clock, {});
  runner.records_.clear();
  runner.states_.assign(runner.tasks_.size(), TaskState{});
  runner.task_ = 0;

  for (const TrialRecord& stored : records) {
    runner.replay_time_ = stored.monotonic_s;
    runner.replay_wall_ms_ = stored.wall_clock_ms;
    if (stored.kind == RecordKind::Begin) {
      if (runner.complete() || runner.states_[runner.task_].begun) {
        throw ValidationError("records", "unexpected begin record at sequence " + std::to_string(stored.sequence));
      }
      runner.begin_task(true);
    } else {
      if (!runner.complete() && !runner.states_[runner.task_].begun &&
          runner.tasks_[runner.task_].kind == Task::Kind::Test) {
        throw ValidationError("records", "missing begin record before sequence " + std::to_string(stored.sequence));
      }
      if (!runner.complete() && runner.tasks_[runner.task_].kind == Task::Kind::Rest) {
        runner.states_[runner.task_].begun = true;
      }
      runner.apply_at(response_from_string(stored.response), stored.monotonic_s, stored.wall_clock_ms, true);
    }
    if (runner.records_.empty() || !(runner.records_.back() == stored)) {
      throw ValidationError("records", "replay diverged from the stored log at sequence " +
                                           std::to_string(stored.sequence));
    }
  }
  runner.replay_time_.reset();
  runner.replay_wall_ms_.reset();
  runner.time_base_ = records.empty() ? 0.0 : records.back().monotonic_s;
  runner.clock_origin_ = clock.monotonic_seconds();
  runner.sink_ = std::move(sink);
  if (!runner.complete() && !runner.states_[runner.task_].begun) runner.begin_task(false);
  return runner;
}

double SessionRunner::now() {
  if (replay_time_) return *replay_time_;
  double t = time_base_ + (clock_->monotonic_seconds() - clock_origin_);
  if (!records_.empty()) t = std::max(t, records_.back().monotonic_s);
  return t;
}

TrialRecord SessionRunner::make_record(RecordKind kind, const Task& task) const {
  TrialRecord r;
  r.sequence = records_.size() + 1;
  r.kind = kind;
  r.participant_id = plan_.participant_id;
  r.condition_index = task.condition_index;
  r.condition = plan_.conditions[task.condition_index];
  r.test = task.test;
  return r;
}

void SessionRunner::append(TrialRecord record, bool replaying) {
  records_.push_back(std::move(record));
  if (!replaying && sink_) sink_(records_.back());
}

void SessionRunner::begin_task(bool replaying, std::optional<double> at) {
  if (complete()) return;
  const Task& task = tasks_[task_];
  TaskState& st = states_[task_];
  st.begun = true;
  if (task.kind == Task::Kind::Rest) return;
  const double t = at ? *at : now();
  st.begin_s = t;
  TrialRecord rec = make_record(RecordKind::Begin, task);
  switch (task.test) {
    case TestKind::Acuity:
      st.staircase = staircase::start(staircase::acuity_config(plan_.calibration.effective_min_logmar()));
      break;
    case TestKind::Contrast:
      st.staircase = staircase::start(staircase::contrast_config());
      break;
    case TestKind::Hue: {
      const auto& cond = plan_.conditions[task.condition_index];
      st.arrangement = hue::shuffle_arrangement(
          hue::generate_cap_set(),
          derive_seed(plan_.seed, {fnv1a(cond.device_label), fnv1a(cond.light_level.label), 2}));
      rec.stimulus = arrangement_snapshot(*st.arrangement);
      break;
    }
  }
  if (st.staircase) {
    rec.level = st.staircase->current_level();
    rec.stimulus = "start";
  }
  rec.monotonic_s = t;
  rec.wall_clock_ms = replay_wall_ms_ ? *replay_wall_ms_ : clock_->wall_clock_ms();
  append(std::move(rec), replaying);
}

void SessionRunner::advance_task(bool replaying, double at) {
  ++task_;
  if (!complete() && !replaying) begin_task(false, at);
}

Prompt SessionRunner::prompt() { return build_prompt(now()); }

Prompt SessionRunner::build_prompt(double now_s) const {
  Prompt p;
  p.sequence = records_.size() + 1;
  p.task_index = task_;
  if (complete()) {
    p.kind = PromptKind::Done;
    return p;
  }
  const Task& task = tasks_[task_];
  const TaskState& st = states_[task_];
  p.condition_index = task.condition_index;
  p.test = task.test;
  if (task.kind == Task::Kind::Rest) {
    p.kind = PromptKind::Rest;
    return p;
  }
  const auto& cond = plan_.conditions[task.condition_index];
  if (task.test == TestKind::Hue) {
    p.kind = PromptKind::HueBoard;
    p.arrangement = st.arrangement;
    p.elapsed_seconds = now_s - st.begin_s;
    p.remaining_seconds = std::max(0.0, plan_.options.hue_min_seconds - p.elapsed_seconds);
    return p;
  }
  p.kind = PromptKind::Trial;
  p.level = st.staircase->current_level();
  const std::uint64_t trial_no = st.staircase->trials().size();
  Rng rng(derive_seed(plan_.seed, {fnv1a(cond.device_label), fnv1a(cond.light_level.label),
                                   static_cast<std::uint64_t>(task.test), trial_no}));
  if (task.test == TestKind::Acuity) {
    p.orientation = static_cast<Orientation>(rng.below(4));
    p.pixel_height = calibration::optotype_pixel_height(p.level, plan_.calibration.geometry);
  } else {
    const auto first = rng.below(kSloanLetters.size());
    auto second = rng.below(kSloanLetters.size() - 1);
    if (second >= first) ++second;
    p.letters = std::string{kSloanLetters[first], kSloanLetters[second]};
    p.grayscale = 1.0 - p.level;
  }
  return p;
}

const TrialRecord& SessionRunner::apply(const Response& response) {
  const double t = now();
  return apply_at(response, t, clock_->wall_clock_ms(), false);
}

const TrialRecord& SessionRunner::apply_at(const Response& response, double now_s, std::int64_t wall_ms,
                                           bool replaying) {
  if (complete()) throw StateError("session is complete; no further responses accepted");
  const Task task = tasks_[task_];
  TaskState& st = states_[task_];

  if (task.kind == Task::Kind::Rest) {
    if (!std::holds_alternative<RestAck>(response)) {
      throw ValidationError("response", "a rest acknowledgement is expected");
    }
    TrialRecord rec = make_record(RecordKind::Rest, task);
    rec.response = "ack";
    rec.monotonic_s = now_s;
    rec.wall_clock_ms = wall_ms;
    append(std::move(rec), replaying);
    const std::size_t index = records_.size() - 1;
    st.complete = true;
    advance_task(replaying, now_s);
    return records_[index];
  }

  if (task.test == TestKind::Hue) {
    TrialRecord rec = make_record(RecordKind::Move, task);
    rec.monotonic_s = now_s;
    rec.wall_clock_ms = wall_ms;
    rec.stimulus = arrangement_snapshot(*st.arrangement);
    if (const auto* move = std::get_if<HueMove>(&response)) {
      st.arrangement = hue::move_cap(*st.arrangement, move->group, move->from_position, move->to_position);
      rec.response = response_to_string(response);
      append(std::move(rec), replaying);
      return records_.back();
    }
    if (!std::holds_alternative<HueSubmit>(response)) {
      throw ValidationError("response", "hue test accepts only moves and submit");
    }
    const double elapsed = now_s - st.begin_s;
    if (elapsed < plan_.options.hue_min_seconds) {
      throw HueTooEarly(plan_.options.hue_min_seconds - elapsed);
    }
    st.tes = hue::score(*st.arrangement);
    rec.kind = RecordKind::Submit;
    rec.response = "submit";
    append(std::move(rec), replaying);
    const std::size_t index = records_.size() - 1;
    st.complete = true;
    st.end_s = now_s;
    advance_task(replaying, now_s);
    return records_[index];
  }

  const Prompt p = build_prompt(now_s);
  bool correct = false;
  TrialRecord rec = make_record(RecordKind::Response, task);
  if (task.test == TestKind::Acuity) {
    const auto* answer = std::get_if<OrientationAnswer>(&response);
    if (!answer) throw ValidationError("response", "acuity test expects an orientation");
    correct = answer->orientation == *p.orientation;
    std::ostringstream stim;
    stim << "orientation=" << to_string(*p.orientation) << ";px=" << format_level(*p.pixel_height);
    rec.stimulus = stim.str();
  } else {
    const auto* answer = std::get_if<LetterAnswer>(&response);
    if (!answer) throw ValidationError("response", "contrast test expects two letters");
    const std::string given = upper(answer->letters);
    if (given.size() != 2 || kSloanLetters.find(given[0]) == std::string_view::npos ||
        kSloanLetters.find(given[1]) == std::string_view::npos) {
      throw ValidationError("letters", "exactly two Sloan letters (CDHKNORSVZ) are expected");
    }
    const std::string& shown = *p.letters;
    const int hits = (given.find(shown[0]) != std::string::npos) + (given.find(shown[1]) != std::string::npos);
    correct = plan_.options.contrast_rule == ContrastRule::BothLetters ? hits == 2 : hits >= 1;
    rec.stimulus = "letters=" + shown + ";grayscale=" + format_level(*p.grayscale);
  }
  rec.level = p.level;
  rec.response = response_to_string(response);
  rec.correct = correct;
  rec.monotonic_s = now_s;
  rec.wall_clock_ms = wall_ms;
  st.staircase = staircase::submit_response(*st.staircase, correct, now_s);
  append(std::move(rec), replaying);
  const std::size_t index = records_.size() - 1;
  if (st.staircase->status() == staircase::Status::Terminated) {
    st.complete = true;
    st.end_s = now_s;
    advance_task(replaying, now_s);
  }
  return records_[index];
}

TestOutcome SessionRunner::outcome_for(std::size_t task_index) const {
  const Task& task = tasks_[task_index];
  const TaskState& st = states_[task_index];
  TestOutcome out;
  out.test = task.test;
  out.complete = st.complete;
  if (st.staircase) out.trials = st.staircase->trials().size();
  if (st.begun) {
    const double end = st.complete ? st.end_s : (records_.empty() ? st.begin_s : records_.back().monotonic_s);
    out.duration_s = std::max(0.0, end - st.begin_s);
  }
  if (!st.complete) return out;
  switch (task.test) {
    case TestKind::Acuity: {
      out.threshold_level = staircase::threshold_estimate(*st.staircase);
      out.acuity = metrics::acuity_from_logmar(*out.threshold_level);
      out.band = metrics::classify_acuity(out.acuity->logmar);
      break;
    }
    case TestKind::Contrast: {
      out.threshold_level = staircase::threshold_estimate(*st.staircase);
      const double grayscale = 1.0 - *out.threshold_level;
      const double weber = calibration::grayscale_to_weber(grayscale, plan_.calibration.curve);
      out.contrast = metrics::contrast_result_from_threshold(weber);
      out.band = metrics::classify_cs(out.contrast->log_cs);
      break;
    }
    case TestKind::Hue: {
      out.tes = st.tes;
      out.trials = 0;
      for (const auto& r : records_) {
        if (r.kind == RecordKind::Move && r.condition_index == task.condition_index) ++out.trials;
      }
      out.band = metrics::classify_tes(st.tes->total);
      break;
    }
  }
  return out;
}

SessionResult SessionRunner::result() const {
  SessionResult result;
  result.plan = plan_;
  result.complete = complete();
  for (const auto& c : plan_.conditions) result.conditions.push_back(ConditionResult{c, {}});
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].kind != Task::Kind::Test) continue;
    result.conditions[tasks_[i].condition_index].tests.push_back(outcome_for(i));
  }
  return result;
}

const staircase::StaircaseState* SessionRunner::active_staircase() const {
  if (complete()) return nullptr;
  const auto& st = states_[task_];
  return st.staircase ? &*st.staircase : nullptr;
}

const hue::HueArrangement* SessionRunner::active_arrangement() const {
  if (complete()) return nullptr;
  const auto& st = states_[task_];
  return st.arrangement ? &*st.arrangement : nullptr;
}

// ---------------------------------------------------------------------------

ScriptedSource::ScriptedSource(std::vector<Response> responses, ManualClock* clock, double seconds_per_response)
    : responses_(std::move(responses)), clock_(clock), seconds_per_response_(seconds_per_response) {}

std::optional<Response> ScriptedSource::respond(const Prompt&) {
  if (next_ >= responses_.size()) return std::nullopt;
  return responses_[next_];
}

void ScriptedSource::on_accepted(const Prompt&, const TrialRecord&) {
  ++next_;
  if (clock_) clock_->advance(seconds_per_response_);
}

void ScriptedSource::on_rejected(const Prompt&, const Error& error) {
  if (const auto* early = dynamic_cast<const HueTooEarly*>(&error); early && clock_) {
    clock_->advance(early->remaining_seconds());
    return;
  }
  (void)error;
  throw;  // a scripted response that does not fit is a script bug
}

std::vector<Response> responses_from_records(const std::vector<TrialRecord>& records) {
  std::vector<Response> out;
  for (const auto& r : records) {
    if (r.kind != RecordKind::Begin) out.push_back(response_from_string(r.response));
  }
  return out;
}

RunStatus drive(SessionRunner& runner, ResponseSource& source, bool single_task) {
  const std::size_t start_task = runner.current_task();
  int rejections = 0;
  while (!runner.complete()) {
    if (single_task && runner.current_task() != start_task) return RunStatus::TaskComplete;
    const Prompt prompt = runner.prompt();
    const auto response = source.respond(prompt);
    if (!response) return RunStatus::Suspended;
    try {
      const TrialRecord& rec = runner.apply(*response);
      rejections = 0;
      source.on_accepted(prompt, rec);
    } catch (const HueTooEarly& e) {
      if (++rejections > 1000) throw StateError("response source keeps submitting too early");
      source.on_rejected(prompt, e);
    } catch (const ValidationError& e) {
      if (++rejections > 1000) throw StateError("response source keeps sending invalid responses");
      source.on_rejected(prompt, e);
    }
  }
  return single_task ? RunStatus::TaskComplete : RunStatus::Complete;
}

TestRunOutput run_test(const SessionPlan& plan, std::size_t condition_index, TestKind test,
                       ResponseSource& source, Clock& clock) {
  if (condition_index >= plan.conditions.size()) {
    throw ValidationError("condition_index", "condition index out of range");
  }
  SessionPlan single = plan;
  single.conditions = {plan.conditions[condition_index]};
  single.test_order = {test};
  single.options.rest_between_conditions = false;
  SessionRunner runner(std::move(single), clock);
  TestRunOutput out;
  out.status = drive(runner, source);
  out.outcome = runner.result().conditions.front().tests.front();
  out.records = runner.records();
  return out;
}

}  // namespace visbench::session
