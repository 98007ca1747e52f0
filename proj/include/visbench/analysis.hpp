#pragma once

// Benchmark analysis over a long-format results table
// (participant, condition, light_level, metric, value).
//
// Per light level and metric: Friedman across conditions and every pairwise
// Wilcoxon signed-rank test with Bonferroni adjustment. Per condition and
// metric: Mann-Whitney U between light levels. Theil-Sen of each device
// against the reference condition, covariance ellipses for metric pairs
// and violin quantiles. Incomplete cells exclude the affected participants
// from that analysis only and are listed in `warnings`.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "visbench/session.hpp"
#include "visbench/stats.hpp"

namespace visbench::analysis {

inline constexpr int kReportVersion = 1;
inline constexpr std::string_view kMetricLogMar = "logMAR";
inline constexpr std::string_view kMetricLogCs = "logCS";
inline constexpr std::string_view kMetricTes = "TES";

struct ResultRow {
  std::string participant;
  std::string condition;
  std::string light_level;
  std::string metric;
  double value = 0.0;
  bool operator==(const ResultRow&) const = default;
};

/// One row per completed test of the session.
std::vector<ResultRow> rows_from_result(const session::SessionResult& result);

std::string format_results_csv(const std::vector<ResultRow>& rows);
/// Expects the header participant,condition,light_level,metric,value.
std::vector<ResultRow> parse_results_csv(std::string_view text);

struct AnalysisOptions {
  /// 0 means the number of pairs in each (light, metric) cell.
  int bonferroni_family = 6;
  std::string reference_condition = "naked-eyes";
  double alpha = 0.05;
  double ellipse_k_sigma = 1.0;
  /// Display order; labels not listed follow in lexicographic order.
  std::vector<std::string> condition_order;
  std::vector<std::string> light_order;
};

struct OmnibusRow {
  std::string light_level;
  std::string metric;
  int subjects = 0;
  std::optional<stats::TestReport> test;
  std::string note;
};

struct PairwiseRow {
  std::string light_level;
  std::string metric;
  std::string condition_a;
  std::string condition_b;
  int pairs = 0;
  std::optional<stats::TestReport> test;
  double p_adjusted = 1.0;
  std::string note;
};

struct LightComparisonRow {
  std::string metric;
  std::string condition;
  std::string light_a;
  std::string light_b;
  int n_a = 0;
  int n_b = 0;
  std::optional<stats::TestReport> test;
  std::string note;
};

struct RegressionRow {
  std::string light_level;
  std::string metric;
  std::string condition;
  std::string reference;
  int pairs = 0;
  stats::LineFit fit;
};

struct EllipseRow {
  std::string condition;
  std::string light_level;
  std::string metric_x;
  std::string metric_y;
  int points = 0;
  stats::EllipseGeometry geometry;
};

struct ViolinSeries {
  std::string light_level;
  std::string condition;
  std::string metric;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  std::vector<double> values;  // sorted
};

struct Report {
  AnalysisOptions options;
  std::vector<std::string> conditions;
  std::vector<std::string> light_levels;
  std::vector<std::string> metrics;
  std::vector<OmnibusRow> omnibus;
  std::vector<PairwiseRow> pairwise;
  std::vector<LightComparisonRow> light_comparisons;
  std::vector<RegressionRow> regressions;
  std::vector<EllipseRow> ellipses;
  std::vector<ViolinSeries> violins;
  std::vector<std::string> warnings;
};

/// Throws ValidationError on duplicate cells or an empty table.
Report analyze_benchmark(const std::vector<ResultRow>& rows, const AnalysisOptions& options = {});

/// "***", "**", "*" or "" for p < .001 / .01 / .05.
std::string_view significance_stars(double p);

nlohmann::json report_to_json(const Report& report);
/// Plot-ready series only: violins, regression lines, ellipses.
nlohmann::json plot_series_json(const Report& report);
/// Plain-text tables: Friedman, pairwise Wilcoxon, Mann-Whitney.
std::string render_tables(const Report& report);

}  // namespace visbench::analysis
