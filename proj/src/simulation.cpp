#include "visbench/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "visbench/csv.hpp"
#include "visbench/errors.hpp"

namespace visbench::simulation {
namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

constexpr double kAcuityGuess = 0.25;    // four orientations
constexpr double kContrastGuess = 0.01;  // two of ten letters

}  // namespace

DeviceProfile parse_device_spec(std::string_view spec) {
  const auto items = split(spec, ',');
  const auto head = split(items.front(), ':');
  if (head.size() < 2 || head.size() > 3) {
    throw ValidationError("observers", "expected KIND:THRESHOLD[:SLOPE] in '" + std::string(spec) + "'");
  }
  DeviceProfile d;
  if (head[0] == "step") {
    d.kind = observer::ObserverKind::Step;
  } else if (head[0] == "logistic") {
    d.kind = observer::ObserverKind::Logistic;
  } else {
    throw ValidationError("observers", "unknown observer kind '" + std::string(head[0]) + "'");
  }
  d.acuity_threshold = csv::parse_double(head[1], "observers");
  if (head.size() == 3) d.acuity_slope = csv::parse_double(head[2], "observers");
  d.label = std::string(items.front());
  for (std::size_t i = 1; i < items.size(); ++i) {
    const auto eq = items[i].find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("observers", "expected key=value, got '" + std::string(items[i]) + "'");
    }
    const auto key = items[i].substr(0, eq);
    const auto value = items[i].substr(eq + 1);
    if (key == "label") {
      if (value.empty()) throw ValidationError("observers", "empty device label");
      d.label = std::string(value);
    } else if (key == "cs") {
      d.contrast_threshold = csv::parse_double(value, "observers.cs");
    } else if (key == "cs_slope") {
      d.contrast_slope = csv::parse_double(value, "observers.cs_slope");
    } else if (key == "hue") {
      d.hue_sigma = csv::parse_double(value, "observers.hue");
    } else if (key == "lapse") {
      d.lapse_rate = csv::parse_double(value, "observers.lapse");
    } else if (key == "guess") {
      d.guess_rate = csv::parse_double(value, "observers.guess");
    } else {
      throw ValidationError("observers", "unknown observer option '" + std::string(key) + "'");
    }
  }
  if (!(d.contrast_threshold > 0.0 && d.contrast_threshold < 1.0)) {
    throw ValidationError("observers.cs", "contrast threshold must be in (0, 1)");
  }
  if (!(d.hue_sigma >= 0.0)) throw ValidationError("observers.hue", "hue noise must be non-negative");
  if (!(d.acuity_slope > 0.0) || !(d.contrast_slope > 0.0)) {
    throw ValidationError("observers", "slopes must be positive");
  }
  return d;
}

LightProfile parse_light_spec(std::string_view spec) {
  const auto parts = split(spec, ':');
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty()) {
    throw ValidationError("light", "expected LABEL:LUX[:SHIFT] in '" + std::string(spec) + "'");
  }
  LightProfile l;
  l.light.label = std::string(parts[0]);
  l.light.illuminance_lux = csv::parse_double(parts[1], "light");
  if (parts.size() == 3) l.shift = csv::parse_double(parts[2], "light");
  if (!(l.light.illuminance_lux > 0.0)) throw ValidationError("light", "illuminance must be > 0 lux");
  return l;
}

ConditionObservers observers_for(const DeviceProfile& device, const LightProfile& light, double participant_offset,
                                 std::uint64_t seed) {
  const double shift = light.shift + participant_offset;
  ConditionObservers o;
  o.acuity.kind = device.kind;
  o.acuity.true_threshold = device.acuity_threshold + shift;
  o.acuity.slope = device.acuity_slope;
  o.acuity.guess_rate = device.guess_rate.value_or(kAcuityGuess);
  o.acuity.lapse_rate = device.lapse_rate;
  o.acuity.seed = derive_seed(seed, {1});

  o.contrast.kind = device.kind;
  o.contrast.true_threshold = std::clamp(device.contrast_threshold * std::pow(10.0, shift), 1e-6, 1.0 - 1e-6);
  o.contrast.slope = device.contrast_slope;
  o.contrast.guess_rate = device.guess_rate.value_or(kContrastGuess);
  o.contrast.lapse_rate = device.lapse_rate;
  o.contrast.seed = derive_seed(seed, {2});

  o.hue_sigma = device.hue_sigma * std::pow(10.0, shift);
  o.hue_seed = derive_seed(seed, {3});
  return o;
}

// ---------------------------------------------------------------------------

SimulatedSource::SimulatedSource(std::vector<ConditionObservers> observers, session::ManualClock& clock,
                                 double seconds_per_response, std::uint64_t seed)
    : models_(std::move(observers)), clock_(&clock), seconds_per_response_(seconds_per_response), rng_(seed) {
  for (const auto& m : models_) {
    acuity_.emplace_back(m.acuity);
    contrast_.emplace_back(m.contrast);
  }
}

std::optional<session::Response> SimulatedSource::respond(const session::Prompt& prompt) {
  using session::PromptKind;
  if (prompt.kind == PromptKind::Done) return std::nullopt;
  if (prompt.kind == PromptKind::Rest) return session::RestAck{};
  if (prompt.condition_index >= models_.size()) {
    throw StateError("no simulated observer for condition " + std::to_string(prompt.condition_index));
  }
  const std::size_t ci = prompt.condition_index;

  if (prompt.kind == PromptKind::HueBoard) {
    auto it = hue_plans_.find(prompt.task_index);
    if (it == hue_plans_.end()) {
      const auto target = observer::simulate_hue_sort(*prompt.arrangement, models_[ci].hue_sigma, models_[ci].hue_seed);
      HuePlan plan;
      auto work = prompt.arrangement->groups();
      for (std::size_t g = 0; g < work.size(); ++g) {
        auto& caps = work[g];
        const auto& want = target.groups()[g];
        for (std::size_t p = 1; p + 1 < caps.size(); ++p) {
          const auto q = static_cast<std::size_t>(std::find(caps.begin(), caps.end(), want[p]) - caps.begin());
          if (q == p) continue;
          plan.moves.push_back(session::HueMove{static_cast<int>(g + 1), static_cast<int>(q), static_cast<int>(p)});
          const int cap = caps[q];
          caps.erase(caps.begin() + static_cast<std::ptrdiff_t>(q));
          caps.insert(caps.begin() + static_cast<std::ptrdiff_t>(p), cap);
        }
      }
      it = hue_plans_.emplace(prompt.task_index, std::move(plan)).first;
    }
    const HuePlan& plan = it->second;
    if (plan.next < plan.moves.size()) return plan.moves[plan.next];
    return session::HueSubmit{};
  }

  if (prompt.test == session::TestKind::Acuity) {
    const bool correct = acuity_[ci].respond(prompt.level);
    auto o = static_cast<int>(*prompt.orientation);
    if (!correct) o = (o + 1 + static_cast<int>(rng_.below(3))) % 4;
    return session::OrientationAnswer{static_cast<session::Orientation>(o)};
  }

  const bool correct = contrast_[ci].respond(prompt.level);
  const std::string& shown = *prompt.letters;
  if (correct) return session::LetterAnswer{shown};
  std::string pool;
  for (char c : session::kSloanLetters) {
    if (shown.find(c) == std::string::npos) pool += c;
  }
  const auto a = rng_.below(pool.size());
  auto b = rng_.below(pool.size() - 1);
  if (b >= a) ++b;
  return session::LetterAnswer{std::string{pool[a], pool[b]}};
}

void SimulatedSource::on_accepted(const session::Prompt& prompt, const session::TrialRecord& record) {
  if (prompt.kind == session::PromptKind::HueBoard && record.kind == session::RecordKind::Move) {
    ++hue_plans_.at(prompt.task_index).next;
  }
  clock_->advance(seconds_per_response_);
}

void SimulatedSource::on_rejected(const session::Prompt&, const Error& error) {
  if (const auto* early = dynamic_cast<const session::HueTooEarly*>(&error)) {
    clock_->advance(early->remaining_seconds());
    return;
  }
  throw;
}

// ---------------------------------------------------------------------------

void SimulationConfig::validate() const {
  if (devices.empty()) throw ValidationError("observers", "at least one device observer is required");
  if (sessions < 1) throw ValidationError("sessions", "sessions must be >= 1");
  if (!(participant_sd >= 0.0)) throw ValidationError("participant_sd", "must be non-negative");
  if (!(seconds_per_response >= 0.0)) throw ValidationError("seconds_per_response", "must be non-negative");
  std::set<std::string> labels;
  for (const auto& d : devices) {
    if (!labels.insert(d.label).second) throw ValidationError("observers", "duplicate device label '" + d.label + "'");
  }
  std::set<std::string> light_labels;
  for (const auto& l : lights) {
    if (!light_labels.insert(l.light.label).second) {
      throw ValidationError("light", "duplicate light label '" + l.light.label + "'");
    }
  }
  calibration.validate();
}

SimulationOutput simulate(const SimulationConfig& config) {
  config.validate();
  std::vector<LightProfile> lights = config.lights;
  if (lights.empty()) lights.push_back(LightProfile{{"default", 500.0}, 0.0});

  SimulationOutput out;
  for (int i = 0; i < config.sessions; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const LightProfile& light = lights[idx % lights.size()];
    double offset = 0.0;
    if (config.participant_sd > 0.0) {
      Rng jitter(derive_seed(config.seed, {0x6a6974ULL, idx}));
      offset = config.participant_sd * jitter.normal();
    }
    std::vector<session::Condition> conditions;
    for (const auto& d : config.devices) conditions.push_back(session::Condition{d.label, light.light});
    session::SessionPlan plan = session::build_plan(i, conditions, config.tests, derive_seed(config.seed, {idx}),
                                                    config.calibration, config.options);

    std::vector<ConditionObservers> observers;
    for (std::size_t c = 0; c < plan.conditions.size(); ++c) {
      const auto dev = std::find_if(config.devices.begin(), config.devices.end(),
                                    [&](const DeviceProfile& d) { return d.label == plan.conditions[c].device_label; });
      const auto dev_index = static_cast<std::uint64_t>(dev - config.devices.begin());
      observers.push_back(observers_for(*dev, light, offset, derive_seed(config.seed, {0x6f6273ULL, idx, dev_index})));
    }

    session::ManualClock clock;
    session::SessionRunner runner(plan, clock);
    SimulatedSource source(std::move(observers), clock, config.seconds_per_response,
                           derive_seed(config.seed, {0x737263ULL, idx}));
    if (session::drive(runner, source) != session::RunStatus::Complete) {
      throw StateError("simulated session " + plan.participant_id + " did not complete");
    }
    SimulatedSession s{runner.plan(), runner.records(), runner.result()};
    auto rows = analysis::rows_from_result(s.result);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    out.sessions.push_back(std::move(s));
  }
  return out;
}

}  // namespace visbench::simulation
