#pragma once

// Bisection staircase.
//
// The level is a scalar difficulty parameter. The interval between
// `bracket_hard` and `bracket_easy` always contains the observer's
// threshold for a deterministic observer: passing a level moves the easy
// side to it, failing a level moves the hard side to it, and the next probe
// is the midpoint. Testing starts at the easiest level.
//
// A level is passed after `passes_required_per_level` consecutive correct
// answers and failed by a single wrong answer. The run terminates when a
// level resolution moves the probe by less than `termination_delta`; the
// threshold estimate is the midpoint of the final bracket.

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

namespace visbench::staircase {

struct StaircaseConfig {
  double easiest_level = 1.0;
  double hardest_level = 0.0;
  double termination_delta = 0.001;
  int passes_required_per_level = 1;
  int alternatives_per_trial = 2;

  /// Throws ValidationError naming the offending field.
  void validate() const;

  bool operator==(const StaircaseConfig&) const = default;
};

/// Tumbling-E acuity in logMAR: start at 1.0, floor at the display's
/// minimum renderable logMAR, eight consecutive correct answers per level.
StaircaseConfig acuity_config(double min_renderable_logmar = -0.62);

/// Letter-contrast test. The level is letter darkness (1 - grayscale):
/// 1.0 is a black letter, 0.0 is a letter identical to the background.
/// One two-letter presentation per level, 10 x 10 response alternatives.
StaircaseConfig contrast_config();

struct TrialOutcome {
  double level = 0.0;
  bool correct = false;
  /// Session-relative monotonic time in seconds.
  double timestamp = 0.0;

  bool operator==(const TrialOutcome&) const = default;
};

enum class Status { Running, Terminated };

/// Immutable staircase state. `submit_response` returns the successor.
class StaircaseState {
 public:
  StaircaseState() = default;

  const StaircaseConfig& config() const noexcept { return config_; }
  double bracket_easy() const noexcept { return bracket_easy_; }
  double bracket_hard() const noexcept { return bracket_hard_; }
  double current_level() const noexcept { return current_level_; }
  int consecutive_correct() const noexcept { return consecutive_correct_; }
  const std::vector<TrialOutcome>& trials() const noexcept { return trials_; }
  Status status() const noexcept { return status_; }
  const std::optional<double>& final_threshold() const noexcept { return final_threshold_; }
  /// Number of passed or failed levels so far.
  int resolutions() const noexcept { return resolutions_; }

  /// Compares the trajectory, ignoring trial timestamps.
  bool same_trajectory(const StaircaseState& other) const;

 private:
  friend StaircaseState start(const StaircaseConfig& config);
  friend StaircaseState submit_response(const StaircaseState& state, bool correct,
                                        double timestamp);

  StaircaseConfig config_;
  double bracket_easy_ = 1.0;
  double bracket_hard_ = 0.0;
  double current_level_ = 1.0;
  int consecutive_correct_ = 0;
  int resolutions_ = 0;
  std::vector<TrialOutcome> trials_;
  Status status_ = Status::Running;
  std::optional<double> final_threshold_;
};

StaircaseState start(const StaircaseConfig& config);

/// Throws StateError once the staircase has terminated.
StaircaseState submit_response(const StaircaseState& state, bool correct,
                               double timestamp = 0.0);

/// Throws StateError while the staircase is still running.
double threshold_estimate(const StaircaseState& state);

inline std::size_t trial_count(const StaircaseState& state) { return state.trials().size(); }

/// Upper bound on level resolutions before termination for any response
/// sequence: ceil(log2(initial width / delta)) + 1.
int max_resolutions(const StaircaseConfig& config);

}  // namespace visbench::staircase
