#include "visbench/staircase.hpp"

#include <cmath>

#include "visbench/errors.hpp"

namespace visbench::staircase {

void StaircaseConfig::validate() const {
  if (!std::isfinite(easiest_level)) throw ValidationError("easiest_level", "easiest_level must be finite");
  if (!std::isfinite(hardest_level)) throw ValidationError("hardest_level", "hardest_level must be finite");
  if (easiest_level == hardest_level) {
    throw ValidationError("hardest_level", "easiest and hardest level must differ");
  }
  if (!(termination_delta > 0.0)) {
    throw ValidationError("termination_delta", "termination_delta must be positive");
  }
  if (!(termination_delta < std::abs(easiest_level - hardest_level))) {
    throw ValidationError("termination_delta", "termination_delta must be smaller than the level range");
  }
  if (passes_required_per_level < 1) {
    throw ValidationError("passes_required_per_level", "passes_required_per_level must be >= 1");
  }
  if (alternatives_per_trial < 1) {
    throw ValidationError("alternatives_per_trial", "alternatives_per_trial must be >= 1");
  }
}

StaircaseConfig acuity_config(double min_renderable_logmar) {
  return StaircaseConfig{.easiest_level = 1.0,
                         .hardest_level = min_renderable_logmar,
                         .termination_delta = 0.001,
                         .passes_required_per_level = 8,
                         .alternatives_per_trial = 4};
}

StaircaseConfig contrast_config() {
  return StaircaseConfig{.easiest_level = 1.0,
                         .hardest_level = 0.0,
                         .termination_delta = 0.0001,
                         .passes_required_per_level = 1,
                         .alternatives_per_trial = 100};
}

bool StaircaseState::same_trajectory(const StaircaseState& other) const {
  if (!(config_ == other.config_) || bracket_easy_ != other.bracket_easy_ ||
      bracket_hard_ != other.bracket_hard_ || current_level_ != other.current_level_ ||
      consecutive_correct_ != other.consecutive_correct_ || status_ != other.status_ ||
      final_threshold_ != other.final_threshold_ || trials_.size() != other.trials_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < trials_.size(); ++i) {
    if (trials_[i].level != other.trials_[i].level || trials_[i].correct != other.trials_[i].correct) {
      return false;
    }
  }
  return true;
}

StaircaseState start(const StaircaseConfig& config) {
  config.validate();
  StaircaseState s;
  s.config_ = config;
  s.bracket_easy_ = config.easiest_level;
  s.bracket_hard_ = config.hardest_level;
  s.current_level_ = config.easiest_level;
  return s;
}

StaircaseState submit_response(const StaircaseState& state, bool correct, double timestamp) {
  if (state.status_ != Status::Running) {
    throw StateError("staircase has terminated; no further responses accepted");
  }
  StaircaseState next = state;
  next.trials_.push_back(TrialOutcome{state.current_level_, correct, timestamp});

  if (correct) {
    next.consecutive_correct_ += 1;
    if (next.consecutive_correct_ < state.config_.passes_required_per_level) {
      return next;
    }
    next.bracket_easy_ = state.current_level_;
  } else {
    next.bracket_hard_ = state.current_level_;
  }

  next.consecutive_correct_ = 0;
  next.resolutions_ += 1;
  const double previous = state.current_level_;
  next.current_level_ = (next.bracket_easy_ + next.bracket_hard_) / 2.0;
  if (std::abs(next.current_level_ - previous) < state.config_.termination_delta) {
    next.status_ = Status::Terminated;
    next.final_threshold_ = next.current_level_;
  }
  return next;
}

double threshold_estimate(const StaircaseState& state) {
  if (state.status() != Status::Terminated) {
    throw StateError("threshold requested before the staircase terminated");
  }
  return *state.final_threshold();
}

int max_resolutions(const StaircaseConfig& config) {
  const double width = std::abs(config.easiest_level - config.hardest_level);
  return static_cast<int>(std::ceil(std::log2(width / config.termination_delta))) + 1;
}

}  // namespace visbench::staircase
