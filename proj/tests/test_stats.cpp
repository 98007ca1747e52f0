#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "visbench/errors.hpp"
#include "visbench/random.hpp"
#include "visbench/stats.hpp"

#include "oracles.hpp"

using namespace visbench;
using namespace visbench::stats;
using namespace oracle;

namespace {

std::vector<std::pair<double, double>> to_pairs(const std::vector<double>& diffs) {
  std::vector<std::pair<double, double>> out;
  for (double d : diffs) out.emplace_back(10.0 + d, 10.0);
  return out;
}

}  // namespace

TEST(Ranks, AverageTies) {
  const std::vector<double> v{3, 1, 3, 2, 3};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
  EXPECT_EQ(average_ranks(v), naive_ranks(v));
}

TEST(Friedman, PerfectConcordance) {
  const auto r = friedman({{{1, 2, 3}, {4, 5, 6}}, {"a", "b", "c"}});
  EXPECT_DOUBLE_EQ(r.statistic, 4.0);
  EXPECT_DOUBLE_EQ(*r.effect_size, 1.0);
  EXPECT_EQ(*r.df, 2.0);
}

TEST(Friedman, BalancedRankSumsGiveNull) {
  const auto r = friedman({{{1, 2, 3}, {2, 3, 1}, {3, 1, 2}}, {}});
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(Friedman, ConstantRowsAreUndefined) {
  EXPECT_THROW(friedman({{{1, 1, 1}, {2, 2, 2}}, {}}), DomainError);
}

TEST(Friedman, ExactMatchesEnumerationN3K3) {
  const std::vector<std::vector<std::vector<double>>> cases{
      {{1.0, 2.0, 3.0}, {2.5, 1.0, 3.5}, {0.2, 0.4, 0.3}},
      {{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}},
      {{1.0, 1.0, 3.0}, {5.0, 4.0, 4.0}, {0.5, 0.7, 0.6}},
      {{3.0, 2.0, 1.0}, {1.0, 3.0, 2.0}, {2.0, 2.0, 1.0}},
  };
  for (const auto& values : cases) {
    const auto r = friedman({values, {}});
    EXPECT_EQ(r.method, Method::Exact);
    EXPECT_NEAR(r.statistic, friedman_oracle_chi2(values), 1e-9);
    EXPECT_NEAR(r.p_value, friedman_oracle_p(values), 1e-12);
  }
}

TEST(Friedman, ExactMatchesEnumerationRandom) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(4), k = 2 + rng.below(3);
    std::vector<std::vector<double>> values(n, std::vector<double>(k));
    for (auto& row : values) {
      for (auto& x : row) x = static_cast<double>(rng.below(4));
    }
    bool informative = false;
    for (const auto& row : values) informative |= std::adjacent_find(row.begin(), row.end(), std::not_equal_to<>()) != row.end();
    if (!informative) continue;
    const auto r = friedman({values, {}});
    EXPECT_NEAR(r.p_value, friedman_oracle_p(values), 1e-12);
  }
}

TEST(Friedman, KendallWBounds) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> values(8, std::vector<double>(4));
    for (auto& row : values) {
      for (auto& x : row) x = rng.uniform();
    }
    const auto r = friedman({values, {}});
    EXPECT_GE(*r.effect_size, 0.0);
    EXPECT_LE(*r.effect_size, 1.0 + 1e-12);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    EXPECT_EQ(r.method, Method::Approximate);
  }
}

TEST(Friedman, MonotoneInvariance) {
  Rng rng(8);
  std::vector<std::vector<double>> values(7, std::vector<double>(4)), transformed = values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      values[i][j] = rng.uniform() + 0.3 * static_cast<double>(j);
      transformed[i][j] = std::exp(3 * values[i][j]) + 5;
    }
  }
  const auto a = friedman({values, {}}), b = friedman({transformed, {}});
  EXPECT_DOUBLE_EQ(a.statistic, b.statistic);
  EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
}

TEST(Wilcoxon, AllSameSignGivesZero) {
  const auto r = wilcoxon_signed_rank(to_pairs({-1, -2, -3, -4, -5}));
  EXPECT_EQ(r.statistic, 0.0);
}

TEST(Wilcoxon, TwelveSameSignPairs) {
  std::vector<double> d;
  for (int i = 1; i <= 12; ++i) d.push_back(-0.1 * i);
  const auto r = wilcoxon_signed_rank(to_pairs(d));
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 4096.0);
  const std::vector<double> p{r.p_value};
  EXPECT_NEAR(bonferroni(p, 6)[0], 0.00293, 1e-5);
}

TEST(Wilcoxon, ExactMatchesEnumerationM5) {
  const std::vector<std::vector<double>> cases{
      {1.5, -0.5, 2.0, 3.0, -1.0}, {1, 1, -1, 2, 2}, {0.3, 0.1, 0.2, 0.5, 0.4}, {-2, 1, -3, 4, -5}};
  for (const auto& d : cases) {
    const auto r = wilcoxon_signed_rank(to_pairs(d));
    EXPECT_EQ(r.method, Method::Exact);
    EXPECT_NEAR(r.p_value, wilcoxon_oracle_p(d), 1e-12);
  }
}

TEST(Wilcoxon, ExactMatchesEnumerationRandom) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(12);
    std::vector<double> d;
    for (std::size_t i = 0; i < m; ++i) {
      double x = static_cast<double>(rng.below(9)) - 4.0;
      if (x == 0) x = 0.5;
      d.push_back(x);
    }
    EXPECT_NEAR(wilcoxon_signed_rank(to_pairs(d)).p_value, wilcoxon_oracle_p(d), 1e-12);
  }
}

TEST(Wilcoxon, SymmetricDifferencesGivePOne) {
  const auto r = wilcoxon_signed_rank(to_pairs({1, -1, 2, -2, 3, -3}));
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(Wilcoxon, ZeroDifferencesDroppedAndAllZeroUndefined) {
  const std::vector<std::pair<double, double>> zeros{{1, 1}, {2, 2}};
  EXPECT_THROW(wilcoxon_signed_rank(zeros), DomainError);
  const auto with_zero = wilcoxon_signed_rank(to_pairs({1, 2, 3}));
  std::vector<std::pair<double, double>> padded = to_pairs({1, 2, 3});
  padded.emplace_back(4, 4);
  EXPECT_EQ(wilcoxon_signed_rank(padded).p_value, with_zero.p_value);
  EXPECT_EQ(wilcoxon_signed_rank(padded).n, 3);
}

TEST(Wilcoxon, PositiveScalingInvariance) {
  const std::vector<double> d{0.4, -0.1, 0.9, 0.3, -0.25, 0.7, 1.1};
  std::vector<double> scaled;
  for (double x : d) scaled.push_back(17.5 * x);
  const auto a = wilcoxon_signed_rank(to_pairs(d)), b = wilcoxon_signed_rank(to_pairs(scaled));
  EXPECT_EQ(a.statistic, b.statistic);
  EXPECT_EQ(a.p_value, b.p_value);
}

TEST(Wilcoxon, LargeSampleUsesApproximation) {
  std::vector<double> d;
  for (int i = 1; i <= 25; ++i) d.push_back(i % 3 == 0 ? -i : i);
  const auto r = wilcoxon_signed_rank(to_pairs(d));
  EXPECT_EQ(r.method, Method::Approximate);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LT(r.p_value, 1.0);
}

TEST(Bonferroni, Examples) {
  const std::vector<double> p{0.0005, 0.5};
  const auto adj = bonferroni(p, 6);
  EXPECT_NEAR(adj[0], 0.003, 1e-15);
  EXPECT_EQ(adj[1], 1.0);
  const std::vector<double> one{0.2};
  EXPECT_EQ(bonferroni(one, 1)[0], 0.2);
  EXPECT_THROW(bonferroni(p, 1), ValidationError);
}

TEST(MannWhitney, CompleteSeparation) {
  const std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8};
  const auto r = mann_whitney_u(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(*r.statistic_a, 0.0);
  EXPECT_EQ(*r.statistic_b, 16.0);
  EXPECT_NEAR(r.p_value, 2.0 / 70.0, 1e-15);
}

TEST(MannWhitney, IdenticalGroups) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_NEAR(mann_whitney_u(a, a).p_value, 1.0, 1e-12);
}

TEST(MannWhitney, ExactMatchesEnumeration4Plus4) {
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases{
      {{1.1, 3.2, 2.5, 7.0}, {4.4, 5.0, 6.1, 0.3}},
      {{1, 2, 2, 3}, {2, 3, 4, 4}},
      {{5, 5, 5, 1}, {5, 2, 2, 9}},
  };
  for (const auto& [a, b] : cases) {
    const auto r = mann_whitney_u(a, b);
    const auto [ua, p] = mann_whitney_oracle(a, b);
    EXPECT_EQ(r.method, Method::Exact);
    EXPECT_DOUBLE_EQ(*r.statistic_a, ua);
    EXPECT_DOUBLE_EQ(r.statistic, std::min(ua, 16.0 - ua));
    EXPECT_NEAR(r.p_value, p, 1e-12);
  }
}

TEST(MannWhitney, ExactMatchesEnumerationRandom) {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t na = 1 + rng.below(7), nb = 1 + rng.below(7);
    std::vector<double> a(na), b(nb);
    for (auto& x : a) x = static_cast<double>(rng.below(6));
    for (auto& x : b) x = static_cast<double>(rng.below(6));
    const auto [ua, p] = mann_whitney_oracle(a, b);
    const auto r = mann_whitney_u(a, b);
    EXPECT_DOUBLE_EQ(*r.statistic_a, ua);
    EXPECT_NEAR(r.p_value, p, 1e-12);
  }
}

TEST(MannWhitney, MonotoneInvariance) {
  Rng rng(2);
  std::vector<double> a(12), b(10);
  for (auto& x : a) x = rng.uniform();
  for (auto& x : b) x = rng.uniform() + 0.3;
  auto f = [](std::vector<double> v) {
    for (auto& x : v) x = std::log(x + 1) * 9 - 2;
    return v;
  };
  const auto r1 = mann_whitney_u(a, b), r2 = mann_whitney_u(f(a), f(b));
  EXPECT_EQ(r1.statistic, r2.statistic);
  EXPECT_EQ(r1.p_value, r2.p_value);
  EXPECT_EQ(r1.method, Method::Approximate);
}

TEST(TheilSen, Collinear) {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
  const auto fit = theil_sen(x, y);
  EXPECT_EQ(fit.slope, 2.0);
  EXPECT_EQ(fit.intercept, 1.0);
}

TEST(TheilSen, GrossOutlierDoesNotMoveSlope) {
  std::vector<double> x, y;
  for (int i = 0; i < 9; ++i) {
    x.push_back(i);
    y.push_back(2.0 * i + 1.0);
  }
  x.push_back(9);
  y.push_back(1000.0);
  EXPECT_EQ(theil_sen(x, y).slope, 2.0);
}

TEST(TheilSen, MatchesPairwiseSlopeMedian) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(5), y(5);
    for (int i = 0; i < 5; ++i) {
      x[i] = rng.uniform() * 10;
      y[i] = rng.normal();
    }
    std::vector<double> slopes;
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
    std::sort(slopes.begin(), slopes.end());
    EXPECT_DOUBLE_EQ(theil_sen(x, y).slope, (slopes[4] + slopes[5]) / 2.0);
  }
}

TEST(TheilSen, DegenerateX) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(theil_sen(x, y), DomainError);
}

TEST(Ellipse, SymmetricCross) {
  const std::vector<std::array<double, 2>> pts{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const auto e = covariance_ellipse(pts);
  EXPECT_NEAR(e.semi_axes[0], e.semi_axes[1], 1e-12);
}

TEST(Ellipse, AxisAlignedVariancesFourAndOne) {
  // Sample variances: 2*6/3 = 4 and 2*1.5/3 = 1.
  const double a = std::sqrt(6.0), b = std::sqrt(1.5);
  const std::vector<std::array<double, 2>> pts{{a, 0}, {-a, 0}, {0, b}, {0, -b}};
  const auto e = covariance_ellipse(pts, 1.0);
  EXPECT_NEAR(e.semi_axes[0], 2.0, 1e-9);
  EXPECT_NEAR(e.semi_axes[1], 1.0, 1e-9);
  EXPECT_NEAR(e.orientation, 0.0, 1e-9);
  EXPECT_FALSE(e.degenerate);
  EXPECT_NEAR(covariance_ellipse(pts, 2.0).semi_axes[0], 4.0, 1e-9);
}

TEST(Ellipse, RotationEquivariance) {
  Rng rng(6);
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({3 * rng.normal(), rng.normal()});
  const auto base = covariance_ellipse(pts);
  for (double theta : {0.3, 1.2, 2.0, 3.0}) {
    std::vector<std::array<double, 2>> rotated;
    for (const auto& p : pts) {
      rotated.push_back({std::cos(theta) * p[0] - std::sin(theta) * p[1],
                         std::sin(theta) * p[0] + std::cos(theta) * p[1]});
    }
    const auto e = covariance_ellipse(rotated);
    const double expected = std::fmod(base.orientation + theta, std::numbers::pi);
    double diff = std::fmod(std::abs(e.orientation - expected), std::numbers::pi);
    diff = std::min(diff, std::numbers::pi - diff);
    EXPECT_NEAR(diff, 0.0, 1e-9);
    EXPECT_NEAR(e.semi_axes[0], base.semi_axes[0], 1e-9);
    EXPECT_NEAR(e.semi_axes[1], base.semi_axes[1], 1e-9);
    EXPECT_GE(e.orientation, 0.0);
    EXPECT_LT(e.orientation, std::numbers::pi);
  }
}

TEST(Ellipse, TranslationInvariance) {
  Rng rng(9);
  std::vector<std::array<double, 2>> pts, moved;
  for (int i = 0; i < 25; ++i) {
    pts.push_back({rng.normal(), 0.5 * rng.normal() + 0.2 * pts.size()});
    moved.push_back({pts.back()[0] + 40, pts.back()[1] - 7});
  }
  const auto a = covariance_ellipse(pts), b = covariance_ellipse(moved);
  EXPECT_NEAR(a.semi_axes[0], b.semi_axes[0], 1e-9);
  EXPECT_NEAR(a.semi_axes[1], b.semi_axes[1], 1e-9);
  EXPECT_NEAR(a.orientation, b.orientation, 1e-9);
  EXPECT_NEAR(b.center[0] - a.center[0], 40, 1e-9);
}

TEST(Ellipse, DegenerateLine) {
  const std::vector<std::array<double, 2>> pts{{0, 0}, {1, 1}, {2, 2}};
  const auto e = covariance_ellipse(pts);
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.semi_axes[1], 0.0);
  EXPECT_NEAR(e.orientation, std::numbers::pi / 4, 1e-9);
  const std::vector<std::array<double, 2>> same{{1, 1}, {1, 1}, {1, 1}};
  EXPECT_THROW(covariance_ellipse(same), DomainError);
}

TEST(Tails, KnownValues) {
  EXPECT_NEAR(chi_square_sf(5.991464547107979, 2), 0.05, 1e-12);
  EXPECT_NEAR(normal_two_sided(1.959963984540054), 0.05, 1e-12);
  EXPECT_EQ(chi_square_sf(0.0, 3), 1.0);
}
