#include "visbench/observer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "visbench/errors.hpp"

namespace visbench::observer {

void ObserverModel::validate() const {
  if (!std::isfinite(true_threshold)) throw ValidationError("true_threshold", "threshold must be finite");
  if (kind == ObserverKind::Logistic && !(slope > 0.0)) {
    throw ValidationError("slope", "logistic slope must be positive");
  }
  if (!(guess_rate >= 0.0 && guess_rate < 1.0)) {
    throw ValidationError("guess_rate", "guess rate must lie in [0, 1)");
  }
  if (!(lapse_rate >= 0.0 && lapse_rate <= 0.1)) {
    throw ValidationError("lapse_rate", "lapse rate must lie in [0, 0.1]");
  }
  if (guess_rate > 1.0 - lapse_rate) {
    throw ValidationError("guess_rate", "guess rate exceeds 1 - lapse rate");
  }
}

double p_correct(const ObserverModel& model, double level) {
  const double ease = model.higher_is_easier ? level - model.true_threshold
                                             : model.true_threshold - level;
  if (model.kind == ObserverKind::Step) {
    return ease > 0.0 ? 1.0 - model.lapse_rate : model.guess_rate;
  }
  const double sigmoid = 1.0 / (1.0 + std::exp(-model.slope * ease));
  return model.guess_rate + (1.0 - model.guess_rate - model.lapse_rate) * sigmoid;
}

SimObserver::SimObserver(ObserverModel model) : model_(model), rng_(derive_seed(model.seed, {0x6f6273ULL})) {
  model_.validate();
}

bool SimObserver::respond(double level) {
  const double p = p_correct(level);
  // Degenerate probabilities do not consume the stream.
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return rng_.bernoulli(p);
}

hue::HueArrangement simulate_hue_sort(const hue::HueArrangement& start, double sigma,
                                      std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("sigma", "hue noise must be non-negative");
  Rng rng(derive_seed(seed, {0x687565ULL}));
  std::vector<std::vector<int>> groups = start.groups();
  for (auto& caps : groups) {
    // Perceived positions are drawn in true-index order so the outcome does
    // not depend on the starting shuffle.
    std::vector<int> interior(caps.begin() + 1, caps.end() - 1);
    std::sort(interior.begin(), interior.end());
    std::vector<std::pair<double, int>> perceived;
    for (int cap : interior) perceived.emplace_back(cap + sigma * rng.normal(), cap);
    std::stable_sort(perceived.begin(), perceived.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < perceived.size(); ++i) caps[i + 1] = perceived[i].second;
  }
  return hue::HueArrangement(std::move(groups));
}

}  // namespace visbench::observer
