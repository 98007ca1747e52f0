#pragma once

// Digital 100-hue arrangement test: cap set, arrangement state and
// total error score.
//
// Positions inside a group are 0-based. Position 0 and position n-1 hold
// the pinned boundary caps of the group; only interior positions move.

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace visbench::hue {

inline constexpr int kCapCount = 85;
inline constexpr int kGroupCount = 4;

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  bool operator==(const Rgb&) const = default;
};

struct Cap {
  int true_index = 0;  // 1-based
  Rgb color;
};

/// Inclusive range of true indices.
struct GroupRange {
  int first = 1;
  int last = 1;

  int size() const noexcept { return last - first + 1; }
  bool operator==(const GroupRange&) const = default;
};

struct CapSet {
  std::vector<Cap> caps;               // ordered by true_index
  std::vector<GroupRange> groups;      // contiguous, disjoint, cover 1..N

  /// Throws ValidationError on any broken invariant.
  void validate() const;
  const Cap& cap(int true_index) const { return caps.at(static_cast<std::size_t>(true_index - 1)); }
};

/// Default split 1-22, 23-43, 44-64, 65-85.
std::vector<GroupRange> default_groups();

/// Hue angle in degrees for a 1-based cap index on the uniform hue circle.
double cap_hue_degrees(int true_index);

/// HSL with h in degrees, s and l in [0,1].
Rgb hsl_to_rgb(double hue_degrees, double saturation, double lightness);

/// 85 caps evenly spaced in hue at fixed saturation and lightness.
CapSet generate_cap_set(double saturation = 1.0, double lightness = 0.5);

/// Override colors from a text table: one `index R G B` row per cap,
/// components in [0,1], '#' starts a comment. All 85 indices are required.
CapSet load_cap_set(const std::filesystem::path& path);

class HueArrangement {
 public:
  HueArrangement() = default;
  explicit HueArrangement(std::vector<std::vector<int>> groups);

  /// Caps in true order: the zero-error arrangement.
  static HueArrangement identity(const std::vector<GroupRange>& groups);

  const std::vector<std::vector<int>>& groups() const noexcept { return groups_; }
  const std::vector<int>& group(int g) const { return groups_.at(static_cast<std::size_t>(g - 1)); }

  /// Checks pinned endpoints and interior permutation against `ranges`.
  void validate(const std::vector<GroupRange>& ranges) const;

  bool operator==(const HueArrangement&) const = default;

 private:
  std::vector<std::vector<int>> groups_;
};

/// Fisher-Yates shuffle of every group's interior, reproducible per seed.
HueArrangement shuffle_arrangement(const CapSet& caps, std::uint64_t seed);

/// Remove the cap at `from_position` of group `group` (1-based) and insert
/// it at `to_position`. Both positions must be interior; otherwise a
/// ValidationError with field "position" is thrown.
HueArrangement move_cap(const HueArrangement& arrangement, int group, int from_position,
                        int to_position);

struct TesReport {
  std::map<int, int> per_cap_error;   // interior caps only, keyed by true index
  std::vector<int> per_group_tes;
  int total = 0;

  bool operator==(const TesReport&) const = default;
};

/// Per-cap error |prev - cap| + |next - cap| - 2 over interior positions,
/// summed per group and overall. Groups are scored independently.
TesReport score(const HueArrangement& arrangement);

}  // namespace visbench::hue
