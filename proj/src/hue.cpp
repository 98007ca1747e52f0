#include "visbench/hue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "visbench/errors.hpp"
#include "visbench/random.hpp"

namespace visbench::hue {

std::vector<GroupRange> default_groups() {
  return {{1, 22}, {23, 43}, {44, 64}, {65, 85}};
}

double cap_hue_degrees(int true_index) {
  return (true_index - 1) * 360.0 / kCapCount;
}

Rgb hsl_to_rgb(double hue_degrees, double saturation, double lightness) {
  const double h = std::fmod(std::fmod(hue_degrees, 360.0) + 360.0, 360.0) / 60.0;
  const double chroma = (1.0 - std::abs(2.0 * lightness - 1.0)) * saturation;
  const double x = chroma * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (h < 1) {
    r = chroma, g = x;
  } else if (h < 2) {
    r = x, g = chroma;
  } else if (h < 3) {
    g = chroma, b = x;
  } else if (h < 4) {
    g = x, b = chroma;
  } else if (h < 5) {
    r = x, b = chroma;
  } else {
    r = chroma, b = x;
  }
  const double m = lightness - chroma / 2.0;
  return {r + m, g + m, b + m};
}

void CapSet::validate() const {
  if (caps.empty()) throw ValidationError("caps", "cap set is empty");
  for (std::size_t i = 0; i < caps.size(); ++i) {
    if (caps[i].true_index != static_cast<int>(i) + 1) {
      throw ValidationError("caps", "caps must be ordered by true_index 1..N");
    }
    const Rgb& c = caps[i].color;
    for (double v : {c.r, c.g, c.b}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("caps", "cap color components must lie in [0,1]");
    }
  }
  int expected = 1;
  for (const GroupRange& g : groups) {
    if (g.first != expected || g.size() < 3) {
      throw ValidationError("groups", "groups must be contiguous ranges of at least 3 caps");
    }
    expected = g.last + 1;
  }
  if (expected != static_cast<int>(caps.size()) + 1) {
    throw ValidationError("groups", "groups must cover every cap");
  }
}

CapSet generate_cap_set(double saturation, double lightness) {
  CapSet set;
  set.caps.reserve(kCapCount);
  for (int i = 1; i <= kCapCount; ++i) {
    set.caps.push_back(Cap{i, hsl_to_rgb(cap_hue_degrees(i), saturation, lightness)});
  }
  set.groups = default_groups();
  return set;
}

CapSet load_cap_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cap set file: " + path.string());
  CapSet set = generate_cap_set();
  std::set<int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    int index;
    Rgb c;
    if (!(row >> index)) continue;
    if (!(row >> c.r >> c.g >> c.b) || index < 1 || index > kCapCount) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected `index R G B`");
    }
    set.caps[static_cast<std::size_t>(index - 1)].color = c;
    seen.insert(index);
  }
  if (static_cast<int>(seen.size()) != kCapCount) {
    throw IoError(path.string() + ": expected rows for all " + std::to_string(kCapCount) + " caps");
  }
  set.validate();
  return set;
}

HueArrangement::HueArrangement(std::vector<std::vector<int>> groups) : groups_(std::move(groups)) {}

HueArrangement HueArrangement::identity(const std::vector<GroupRange>& groups) {
  std::vector<std::vector<int>> order;
  for (const GroupRange& g : groups) {
    std::vector<int> caps(static_cast<std::size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i) caps[static_cast<std::size_t>(i)] = g.first + i;
    order.push_back(std::move(caps));
  }
  return HueArrangement(std::move(order));
}

void HueArrangement::validate(const std::vector<GroupRange>& ranges) const {
  if (groups_.size() != ranges.size()) {
    throw ValidationError("arrangement", "arrangement group count does not match the cap set");
  }
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    const auto& caps = groups_[g];
    const GroupRange& range = ranges[g];
    if (static_cast<int>(caps.size()) != range.size() || caps.front() != range.first ||
        caps.back() != range.last) {
      throw ValidationError("arrangement", "group " + std::to_string(g + 1) + " endpoints are not pinned");
    }
    std::vector<int> sorted = caps;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < range.size(); ++i) {
      if (sorted[static_cast<std::size_t>(i)] != range.first + i) {
        throw ValidationError("arrangement", "group " + std::to_string(g + 1) + " is not a permutation of its caps");
      }
    }
  }
}

HueArrangement shuffle_arrangement(const CapSet& caps, std::uint64_t seed) {
  caps.validate();
  HueArrangement base = HueArrangement::identity(caps.groups);
  std::vector<std::vector<int>> groups = base.groups();
  Rng rng(derive_seed(seed, {0x4875ULL}));
  for (auto& g : groups) {
    // Interior occupies [1, n-2].
    for (std::size_t i = g.size() - 2; i > 1; --i) {
      const std::size_t j = 1 + rng.below(i);  // uniform in [1, i]
      std::swap(g[i], g[j]);
    }
  }
  return HueArrangement(std::move(groups));
}

HueArrangement move_cap(const HueArrangement& arrangement, int group, int from_position,
                        int to_position) {
  if (group < 1 || group > static_cast<int>(arrangement.groups().size())) {
    throw ValidationError("group", "group " + std::to_string(group) + " does not exist");
  }
  std::vector<std::vector<int>> groups = arrangement.groups();
  auto& caps = groups[static_cast<std::size_t>(group - 1)];
  const int n = static_cast<int>(caps.size());
  auto interior = [n](int p) { return p >= 1 && p <= n - 2; };
  if (!interior(from_position) || !interior(to_position)) {
    throw ValidationError("position", "pinned endpoint caps cannot be moved or displaced");
  }
  const int cap = caps[static_cast<std::size_t>(from_position)];
  caps.erase(caps.begin() + from_position);
  caps.insert(caps.begin() + to_position, cap);
  return HueArrangement(std::move(groups));
}

TesReport score(const HueArrangement& arrangement) {
  TesReport report;
  for (const auto& caps : arrangement.groups()) {
    int group_tes = 0;
    for (std::size_t i = 1; i + 1 < caps.size(); ++i) {
      const int error = std::abs(caps[i - 1] - caps[i]) + std::abs(caps[i + 1] - caps[i]) - 2;
      report.per_cap_error[caps[i]] = error;
      group_tes += error;
    }
    report.per_group_tes.push_back(group_tes);
    report.total += group_tes;
  }
  return report;
}

}  // namespace visbench::hue
