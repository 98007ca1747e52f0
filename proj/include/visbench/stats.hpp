#pragma once

// Rank-based tests, Bonferroni adjustment, Theil-Sen regression and
// covariance ellipses.
//
// Exact p-values are computed from the full permutation / sign /
// assignment distribution of the statistic when the sample is small enough
// (see the k*Exact* bounds); larger samples use the usual normal or
// chi-square approximations. `TestReport::method` always says which path
// ran. All p-values are two-sided.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace visbench::stats {

inline constexpr int kWilcoxonExactMaxPairs = 20;
inline constexpr int kMannWhitneyExactMaxTotal = 16;
inline constexpr int kFriedmanExactMaxSubjects = 5;
inline constexpr int kFriedmanExactMaxConditions = 4;

enum class Method { Exact, Approximate };

std::string_view to_string(Method method);

struct TestReport {
  double statistic = 0.0;
  std::optional<double> df;
  double p_value = 1.0;
  std::optional<double> effect_size;
  Method method = Method::Approximate;
  /// Normal-approximation z, also reported next to exact results.
  std::optional<double> z;
  /// Asymptotic p-value when an exact one was computed as well.
  std::optional<double> p_value_approximate;
  /// Test specific: W+ / W- for Wilcoxon, U_a / U_b for Mann-Whitney.
  std::optional<double> statistic_a;
  std::optional<double> statistic_b;
  int n = 0;
};

/// Rows are subjects, columns are conditions.
struct RepeatedMeasures {
  std::vector<std::vector<double>> values;
  std::vector<std::string> column_labels;

  void validate() const;
};

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Friedman chi-square with tie correction, df = k - 1, Kendall's W as
/// effect size. Throws DomainError when every row is constant.
TestReport friedman(const RepeatedMeasures& data);

/// Signed-rank test on a - b. Zero differences are dropped. The reported
/// statistic is min(W+, W-). Throws DomainError when all differences are 0.
TestReport wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs);

/// Multiply by the family size and clamp to 1.
std::vector<double> bonferroni(std::span<const double> p_values, int family_size);

/// U = min(U_a, U_b); statistic_a carries U_a.
TestReport mann_whitney_u(std::span<const double> group_a, std::span<const double> group_b);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

double median(std::vector<double> values);

/// Theil-Sen: median of pairwise slopes (pairs with equal x skipped),
/// intercept = median(y - slope * x).
LineFit theil_sen(std::span<const double> x, std::span<const double> y);

struct EllipseGeometry {
  std::array<double, 2> center{};
  std::array<double, 2> semi_axes{};  // descending
  double orientation = 0.0;           // radians in [0, pi)
  bool degenerate = false;
};

/// Sample covariance (n - 1) ellipse scaled by k_sigma. A singular
/// covariance yields `degenerate` with the minor axis set to zero.
EllipseGeometry covariance_ellipse(std::span<const std::array<double, 2>> points, double k_sigma = 1.0);

/// Chi-square upper tail P(X >= x).
double chi_square_sf(double x, double df);
/// Two-sided standard normal tail 2 * P(Z >= |z|).
double normal_two_sided(double z);

}  // namespace visbench::stats
