#pragma once

// Simulated observers used to drive the tests headlessly and as oracles
// for staircase convergence.

#include <cstdint>
#include <string>

#include "visbench/hue.hpp"
#include "visbench/random.hpp"

namespace visbench::observer {

enum class ObserverKind { Step, Logistic };

struct ObserverModel {
  ObserverKind kind = ObserverKind::Step;
  double true_threshold = 0.0;  // staircase level units
  double slope = 1.0;           // logistic only
  double guess_rate = 0.0;
  double lapse_rate = 0.0;
  /// Orientation of the level axis. Both built-in tests use larger = easier.
  bool higher_is_easier = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Probability of a correct answer at `level`, within [guess, 1 - lapse].
/// A step observer answers correctly only at levels strictly easier than
/// its threshold.
double p_correct(const ObserverModel& model, double level);

/// Observer with its own seeded random stream.
class SimObserver {
 public:
  explicit SimObserver(ObserverModel model);

  const ObserverModel& model() const noexcept { return model_; }
  double p_correct(double level) const { return observer::p_correct(model_, level); }

  /// Bernoulli draw with p_correct(level).
  bool respond(double level);

 private:
  ObserverModel model_;
  Rng rng_;
};

/// Simulated hue sorter: each interior cap is perceived at its true index
/// plus Gaussian noise of `sigma` cap steps; caps are placed in perceived
/// order. sigma = 0 reproduces the true order.
hue::HueArrangement simulate_hue_sort(const hue::HueArrangement& start, double sigma,
                                      std::uint64_t seed);

}  // namespace visbench::observer
