#include "visbench/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>

#include "visbench/errors.hpp"

namespace visbench::stats {
namespace {

// Ranks are multiples of 1/2, so doubled ranks are exact integers and the
// exact distributions below can be tabulated over integer sums.
std::vector<std::int64_t> doubled_ranks(std::span<const double> values) {
  const std::vector<double> ranks = average_ranks(values);
  std::vector<std::int64_t> out(ranks.size());
  std::transform(ranks.begin(), ranks.end(), out.begin(),
                 [](double r) { return static_cast<std::int64_t>(std::llround(2.0 * r)); });
  return out;
}

// Sum of t^3 - t over tie groups.
double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    term += t * t * t - t;
    i = j;
  }
  return term;
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " contains a non-finite value");
  }
}

// Continuity-corrected z for a statistic with the given mean and variance.
double corrected_z(double value, double mean, double variance) {
  if (!(variance > 0.0)) return 0.0;
  const double diff = value - mean;
  const double corrected = std::max(0.0, std::abs(diff) - 0.5);
  return std::copysign(corrected, diff) / std::sqrt(variance);
}

// Enumerates every within-row permutation of the doubled ranks and counts
// assignments whose sum of squared column totals reaches `observed`.
void friedman_enumerate(const std::vector<std::vector<std::int64_t>>& rows, std::size_t row,
                        std::vector<std::int64_t>& column_sums, std::int64_t observed,
                        std::uint64_t& hits, std::uint64_t& total) {
  if (row == rows.size()) {
    std::int64_t ss = 0;
    for (std::int64_t s : column_sums) ss += s * s;
    ++total;
    if (ss >= observed) ++hits;
    return;
  }
  std::vector<std::int64_t> perm = rows[row];
  std::sort(perm.begin(), perm.end());
  // All k! position orders, duplicates included, so that tied rows keep
  // the uniform-over-positions null distribution.
  std::vector<std::size_t> idx(perm.size());
  std::iota(idx.begin(), idx.end(), 0);
  do {
    for (std::size_t c = 0; c < idx.size(); ++c) column_sums[c] += perm[idx[c]];
    friedman_enumerate(rows, row + 1, column_sums, observed, hits, total);
    for (std::size_t c = 0; c < idx.size(); ++c) column_sums[c] -= perm[idx[c]];
  } while (std::next_permutation(idx.begin(), idx.end()));
}

}  // namespace

std::string_view to_string(Method method) {
  return method == Method::Exact ? "exact" : "approximate";
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw DomainError("chi-square degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double normal_two_sided(double z) {
  return std::min(1.0, boost::math::erfc(std::abs(z) / std::numbers::sqrt2));
}

void RepeatedMeasures::validate() const {
  if (values.size() < 2) throw ValidationError("values", "need at least 2 subjects");
  const std::size_t k = values.front().size();
  if (k < 2) throw ValidationError("values", "need at least 2 conditions");
  for (const auto& row : values) {
    if (row.size() != k) throw ValidationError("values", "repeated measures must be rectangular");
    require_finite(row, "repeated measures");
  }
  if (!column_labels.empty() && column_labels.size() != k) {
    throw ValidationError("column_labels", "one label per condition required");
  }
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

TestReport friedman(const RepeatedMeasures& data) {
  data.validate();
  const std::size_t n = data.values.size();
  const std::size_t k = data.values.front().size();
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);

  std::vector<std::vector<std::int64_t>> rows;
  std::vector<std::int64_t> column_sums(k, 0);
  double ties = 0.0;
  for (const auto& row : data.values) {
    rows.push_back(doubled_ranks(row));
    for (std::size_t c = 0; c < k; ++c) column_sums[c] += rows.back()[c];
    ties += tie_term(row);
  }
  const double correction = 1.0 - ties / (nd * kd * (kd * kd - 1.0));
  if (correction <= 1e-12) {
    throw DomainError("friedman statistic undefined: every subject has identical values across conditions");
  }
  std::int64_t ss2 = 0;  // sum of squared doubled rank sums
  for (std::int64_t s : column_sums) ss2 += s * s;
  const double rank_ss = static_cast<double>(ss2) / 4.0;
  const double chi2 =
      (12.0 / (nd * kd * (kd + 1.0)) * rank_ss - 3.0 * nd * (kd + 1.0)) / correction;

  TestReport report;
  report.n = static_cast<int>(n);
  report.statistic = std::max(0.0, chi2);
  report.df = kd - 1.0;
  report.effect_size = report.statistic / (nd * (kd - 1.0));
  const double p_approx = chi_square_sf(report.statistic, kd - 1.0);
  if (n <= static_cast<std::size_t>(kFriedmanExactMaxSubjects) &&
      k <= static_cast<std::size_t>(kFriedmanExactMaxConditions)) {
    std::vector<std::int64_t> sums(k, 0);
    std::uint64_t hits = 0, total = 0;
    friedman_enumerate(rows, 0, sums, ss2, hits, total);
    report.method = Method::Exact;
    report.p_value = static_cast<double>(hits) / static_cast<double>(total);
    report.p_value_approximate = p_approx;
  } else {
    report.method = Method::Approximate;
    report.p_value = p_approx;
  }
  return report;
}

TestReport wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> diffs;
  for (const auto& [a, b] : pairs) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("wilcoxon input contains a non-finite value");
    if (a - b != 0.0) diffs.push_back(a - b);
  }
  if (diffs.empty()) {
    throw DomainError("wilcoxon signed-rank undefined: all differences are zero");
  }
  const std::size_t m = diffs.size();
  std::vector<double> magnitudes(m);
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const std::vector<std::int64_t> ranks = doubled_ranks(magnitudes);

  std::int64_t total2 = 0, plus2 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    total2 += ranks[i];
    if (diffs[i] > 0.0) plus2 += ranks[i];
  }
  const double w_plus = static_cast<double>(plus2) / 2.0;
  const double w_minus = static_cast<double>(total2 - plus2) / 2.0;

  TestReport report;
  report.n = static_cast<int>(m);
  report.statistic = std::min(w_plus, w_minus);
  report.statistic_a = w_plus;
  report.statistic_b = w_minus;

  const double md = static_cast<double>(m);
  const double mean = md * (md + 1.0) / 4.0;
  const double variance = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term(magnitudes) / 48.0;
  const double z = corrected_z(w_plus, mean, variance);
  report.z = z;
  report.effect_size = std::abs(z) / std::sqrt(md);
  const double p_approx = normal_two_sided(z);

  if (m <= static_cast<std::size_t>(kWilcoxonExactMaxPairs)) {
    // counts[s] = number of sign assignments with doubled W+ == s.
    std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    std::int64_t reach = 0;
    for (std::int64_t r : ranks) {
      for (std::int64_t s = reach; s >= 0; --s) {
        if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      }
      reach += r;
    }
    const std::int64_t observed = std::abs(2 * plus2 - total2);
    double hits = 0.0;
    for (std::int64_t s = 0; s <= total2; ++s) {
      if (std::abs(2 * s - total2) >= observed) hits += counts[static_cast<std::size_t>(s)];
    }
    report.method = Method::Exact;
    report.p_value = std::min(1.0, hits / std::ldexp(1.0, static_cast<int>(m)));
    report.p_value_approximate = p_approx;
  } else {
    report.method = Method::Approximate;
    report.p_value = p_approx;
  }
  return report;
}

std::vector<double> bonferroni(std::span<const double> p_values, int family_size) {
  if (family_size < static_cast<int>(p_values.size()) || family_size < 1) {
    throw ValidationError("family_size", "family size must be at least the number of p-values");
  }
  std::vector<double> adjusted(p_values.size());
  std::transform(p_values.begin(), p_values.end(), adjusted.begin(),
                 [family_size](double p) { return std::min(1.0, p * family_size); });
  return adjusted;
}

TestReport mann_whitney_u(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.empty() || group_b.empty()) throw DomainError("mann-whitney requires two non-empty groups");
  require_finite(group_a, "group a");
  require_finite(group_b, "group b");
  const std::size_t na = group_a.size(), nb = group_b.size(), total_n = na + nb;
  std::vector<double> pooled(group_a.begin(), group_a.end());
  pooled.insert(pooled.end(), group_b.begin(), group_b.end());
  const std::vector<std::int64_t> ranks = doubled_ranks(pooled);

  std::int64_t ra2 = 0;
  for (std::size_t i = 0; i < na; ++i) ra2 += ranks[i];
  const std::int64_t na_i = static_cast<std::int64_t>(na), nb_i = static_cast<std::int64_t>(nb);
  const std::int64_t ua2 = ra2 - na_i * (na_i + 1);  // doubled U_a
  const std::int64_t center2 = na_i * nb_i;          // doubled E[U]

  TestReport report;
  report.n = static_cast<int>(total_n);
  report.statistic_a = static_cast<double>(ua2) / 2.0;
  report.statistic_b = static_cast<double>(2 * center2 - ua2) / 2.0;
  report.statistic = std::min(*report.statistic_a, *report.statistic_b);

  const double nad = static_cast<double>(na), nbd = static_cast<double>(nb), nd = static_cast<double>(total_n);
  const double variance =
      nad * nbd / 12.0 * ((nd + 1.0) - tie_term(pooled) / (nd * (nd - 1.0 > 0.0 ? nd - 1.0 : 1.0)));
  const double z = corrected_z(*report.statistic_a, nad * nbd / 2.0, variance);
  report.z = z;
  report.effect_size = std::abs(z) / std::sqrt(nd);
  const double p_approx = variance > 0.0 ? normal_two_sided(z) : 1.0;

  if (total_n <= static_cast<std::size_t>(kMannWhitneyExactMaxTotal)) {
    std::int64_t rank_total = 0;
    for (std::int64_t r : ranks) rank_total += r;
    // counts[j][s]: subsets of size j with doubled rank sum s.
    std::vector<std::vector<double>> counts(na + 1, std::vector<double>(static_cast<std::size_t>(rank_total) + 1, 0.0));
    counts[0][0] = 1.0;
    for (std::int64_t r : ranks) {
      for (std::size_t j = na; j >= 1; --j) {
        for (std::int64_t s = rank_total - r; s >= 0; --s) {
          const double c = counts[j - 1][static_cast<std::size_t>(s)];
          if (c != 0.0) counts[j][static_cast<std::size_t>(s + r)] += c;
        }
      }
    }
    const std::int64_t observed = std::abs(ua2 - center2);
    double hits = 0.0, all = 0.0;
    for (std::int64_t s = 0; s <= rank_total; ++s) {
      const double c = counts[na][static_cast<std::size_t>(s)];
      if (c == 0.0) continue;
      all += c;
      if (std::abs(s - na_i * (na_i + 1) - center2) >= observed) hits += c;
    }
    report.method = Method::Exact;
    report.p_value = std::min(1.0, hits / all);
    report.p_value_approximate = p_approx;
  } else {
    report.method = Method::Approximate;
    report.p_value = p_approx;
  }
  return report;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty sequence");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

LineFit theil_sen(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("theil-sen needs equally many x and y values");
  require_finite(x, "x");
  require_finite(y, "y");
  std::vector<double> slopes;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (x[i] == x[j]) continue;
      slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
  }
  if (slopes.empty()) throw DomainError("theil-sen needs at least two distinct x values");
  LineFit fit;
  fit.slope = median(std::move(slopes));
  std::vector<double> offsets(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) offsets[i] = y[i] - fit.slope * x[i];
  fit.intercept = median(std::move(offsets));
  return fit;
}

EllipseGeometry covariance_ellipse(std::span<const std::array<double, 2>> points, double k_sigma) {
  if (points.size() < 3) throw DomainError("covariance ellipse needs at least 3 points");
  if (!(k_sigma > 0.0)) throw DomainError("k_sigma must be positive");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw DomainError("non-finite point");
    mean += Eigen::Vector2d(p[0], p[1]);
  }
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d d = Eigen::Vector2d(p[0], p[1]) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size() - 1);

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
  const Eigen::Vector2d eigenvalues = solver.eigenvalues();  // ascending
  const double major = eigenvalues(1);
  if (!(major > 0.0)) throw DomainError("covariance ellipse undefined: all points coincide");
  const Eigen::Vector2d axis = solver.eigenvectors().col(1);

  EllipseGeometry e;
  e.center = {mean(0), mean(1)};
  e.semi_axes[0] = k_sigma * std::sqrt(major);
  if (eigenvalues(0) <= 1e-12 * major) {
    e.degenerate = true;
    e.semi_axes[1] = 0.0;
  } else {
    e.semi_axes[1] = k_sigma * std::sqrt(eigenvalues(0));
  }
  double angle = std::atan2(axis(1), axis(0));
  if (angle < 0.0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle -= std::numbers::pi;
  e.orientation = angle;
  return e;
}

}  // namespace visbench::stats
