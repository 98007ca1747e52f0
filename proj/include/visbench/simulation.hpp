#pragma once

// Headless benchmark simulation: simulated observers answer every prompt
// of complete sessions, one session per virtual participant.
//
// Device spec:  KIND:ACUITY[:SLOPE][,cs=LEVEL][,cs_slope=S][,hue=SIGMA]
//               [,lapse=L][,guess=G][,label=NAME]
//   KIND is step or logistic. ACUITY is the logMAR threshold, cs the
//   letter-darkness threshold of the contrast staircase and hue the noise
//   (in cap steps) of the simulated arrangement.
// Light spec:   LABEL:LUX[:SHIFT]
//   SHIFT (log10 units) worsens every device under that light: acuity
//   threshold + SHIFT, contrast level * 10^SHIFT, hue noise * 10^SHIFT.
//
// Participants are assigned to light levels in rotation and run every
// device under their light, in counterbalanced order.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "visbench/analysis.hpp"
#include "visbench/calibration.hpp"
#include "visbench/observer.hpp"
#include "visbench/session.hpp"

namespace visbench::simulation {

struct DeviceProfile {
  std::string label;
  observer::ObserverKind kind = observer::ObserverKind::Step;
  double acuity_threshold = 0.0;
  double acuity_slope = 20.0;
  double contrast_threshold = 0.01;
  double contrast_slope = 1000.0;
  double hue_sigma = 1.0;
  double lapse_rate = 0.0;
  /// Defaults to 1 / alternatives of each test (0.25 and 0.01).
  std::optional<double> guess_rate;
};

DeviceProfile parse_device_spec(std::string_view spec);

struct LightProfile {
  session::LightLevel light;
  double shift = 0.0;
};

LightProfile parse_light_spec(std::string_view spec);

/// Observer parameters of one participant in one condition.
struct ConditionObservers {
  observer::ObserverModel acuity;
  observer::ObserverModel contrast;
  double hue_sigma = 0.0;
  std::uint64_t hue_seed = 0;
};

ConditionObservers observers_for(const DeviceProfile& device, const LightProfile& light, double participant_offset,
                                 std::uint64_t seed);

/// Answers prompts from simulated observers (one per plan condition).
/// Hue boards are solved as a sequence of cap moves followed by a submit;
/// an early submit advances the clock by the remaining time.
class SimulatedSource final : public session::ResponseSource {
 public:
  SimulatedSource(std::vector<ConditionObservers> observers, session::ManualClock& clock,
                  double seconds_per_response, std::uint64_t seed);

  std::optional<session::Response> respond(const session::Prompt& prompt) override;
  void on_accepted(const session::Prompt& prompt, const session::TrialRecord& record) override;
  void on_rejected(const session::Prompt& prompt, const Error& error) override;

 private:
  struct HuePlan {
    std::vector<session::HueMove> moves;
    std::size_t next = 0;
  };

  std::vector<ConditionObservers> models_;
  std::vector<observer::SimObserver> acuity_;
  std::vector<observer::SimObserver> contrast_;
  std::map<std::size_t, HuePlan> hue_plans_;  // by task index
  session::ManualClock* clock_;
  double seconds_per_response_;
  Rng rng_;
};

struct SimulationConfig {
  std::vector<DeviceProfile> devices;
  std::vector<LightProfile> lights;  // empty: one "default" light of 500 lux
  int sessions = 1;
  std::uint64_t seed = 0;
  calibration::CalibrationProfile calibration = calibration::reference_profile();
  std::vector<session::TestKind> tests = {session::TestKind::Acuity, session::TestKind::Contrast,
                                          session::TestKind::Hue};
  /// SD of the per-participant offset, in the same log units as SHIFT.
  double participant_sd = 0.0;
  double seconds_per_response = 2.0;
  session::SessionOptions options;

  void validate() const;
};

struct SimulatedSession {
  session::SessionPlan plan;
  std::vector<session::TrialRecord> records;
  session::SessionResult result;
};

struct SimulationOutput {
  std::vector<SimulatedSession> sessions;
  std::vector<analysis::ResultRow> rows;
};

SimulationOutput simulate(const SimulationConfig& config);

}  // namespace visbench::simulation
