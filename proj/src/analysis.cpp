#include "visbench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "visbench/csv.hpp"
#include "visbench/errors.hpp"

using nlohmann::json;

namespace visbench::analysis {
namespace {

constexpr std::array<std::string_view, 5> kResultColumns = {"participant", "condition", "light_level", "metric",
                                                            "value"};

std::vector<std::string> ordered(const std::set<std::string>& seen, const std::vector<std::string>& preferred,
                                 std::string_view last = {}) {
  std::vector<std::string> out;
  for (const auto& p : preferred) {
    if (seen.count(p) && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  std::vector<std::string> rest;
  for (const auto& s : seen) {
    if (std::find(out.begin(), out.end(), s) == out.end()) rest.push_back(s);
  }
  if (!last.empty() && preferred.empty()) {
    auto it = std::find(rest.begin(), rest.end(), last);
    if (it != rest.end()) std::rotate(it, it + 1, rest.end());
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

// Linear interpolation between order statistics (R type 7).
double quantile(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

struct Table {
  using Key = std::tuple<std::string, std::string, std::string>;  // light, metric, condition
  std::map<Key, std::map<std::string, double>> cells;             // -> participant -> value
  std::map<std::string, std::set<std::string>> participants_by_light;

  const std::map<std::string, double>* cell(const std::string& light, const std::string& metric,
                                            const std::string& condition) const {
    auto it = cells.find({light, metric, condition});
    return it == cells.end() ? nullptr : &it->second;
  }
};

stats::TestReport null_report(int n, std::optional<double> df) {
  stats::TestReport r;
  r.statistic = 0.0;
  r.df = df;
  r.p_value = 1.0;
  r.effect_size = 0.0;
  r.method = stats::Method::Exact;
  r.n = n;
  return r;
}

}  // namespace

std::vector<ResultRow> rows_from_result(const session::SessionResult& result) {
  std::vector<ResultRow> rows;
  for (const auto& cond : result.conditions) {
    for (const auto& t : cond.tests) {
      if (!t.complete) continue;
      ResultRow row{result.plan.participant_id, cond.condition.device_label, cond.condition.light_level.label, "", 0.0};
      if (t.acuity) {
        row.metric = kMetricLogMar;
        row.value = t.acuity->logmar;
      } else if (t.contrast) {
        row.metric = kMetricLogCs;
        row.value = t.contrast->log_cs;
      } else if (t.tes) {
        row.metric = kMetricTes;
        row.value = t.tes->total;
      } else {
        continue;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string format_results_csv(const std::vector<ResultRow>& rows) {
  std::string out = csv::format_row(csv::Row(kResultColumns.begin(), kResultColumns.end()));
  for (const auto& r : rows) {
    out += csv::format_row({r.participant, r.condition, r.light_level, r.metric, csv::format_double(r.value)});
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows.front() != csv::Row(kResultColumns.begin(), kResultColumns.end())) {
    throw ValidationError("header", "results table must start with participant,condition,light_level,metric,value");
  }
  std::vector<ResultRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != kResultColumns.size()) {
      throw ValidationError("row", "results row " + std::to_string(i) + " has " + std::to_string(r.size()) + " fields");
    }
    out.push_back(ResultRow{r[0], r[1], r[2], r[3], csv::parse_double(r[4], "value")});
  }
  return out;
}

std::string_view significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

Report analyze_benchmark(const std::vector<ResultRow>& rows, const AnalysisOptions& options) {
  if (rows.empty()) throw ValidationError("rows", "results table is empty");
  if (options.bonferroni_family < 0) throw ValidationError("bonferroni_family", "family size must be >= 0");
  if (!(options.ellipse_k_sigma > 0.0)) throw ValidationError("ellipse_k_sigma", "must be positive");

  Report report;
  report.options = options;
  Table table;
  std::set<std::string> conditions, lights, metrics;
  for (const auto& r : rows) {
    if (r.participant.empty() || r.condition.empty() || r.light_level.empty() || r.metric.empty()) {
      throw ValidationError("row", "results rows need participant, condition, light_level and metric");
    }
    conditions.insert(r.condition);
    lights.insert(r.light_level);
    metrics.insert(r.metric);
    table.participants_by_light[r.light_level].insert(r.participant);
    if (!std::isfinite(r.value)) {
      report.warnings.push_back("non-finite value ignored: participant " + r.participant + ", " + r.condition + ", " +
                                r.light_level + ", " + r.metric);
      continue;
    }
    auto& cell = table.cells[{r.light_level, r.metric, r.condition}];
    if (!cell.emplace(r.participant, r.value).second) {
      throw ValidationError("row", "duplicate cell: participant " + r.participant + ", " + r.condition + ", " +
                                       r.light_level + ", " + r.metric);
    }
  }
  report.conditions = ordered(conditions, options.condition_order, options.reference_condition);
  report.light_levels = ordered(lights, options.light_order);
  report.metrics = ordered(metrics, {std::string(kMetricLogMar), std::string(kMetricLogCs), std::string(kMetricTes)});
  const auto& conds = report.conditions;
  const std::size_t k = conds.size();

  // Friedman and pairwise Wilcoxon per (light, metric).
  for (const auto& light : report.light_levels) {
    const auto& people = table.participants_by_light[light];
    for (const auto& metric : report.metrics) {
      OmnibusRow omni{light, metric, 0, std::nullopt, ""};
      stats::RepeatedMeasures data;
      data.column_labels = conds;
      std::vector<std::string> excluded;
      for (const auto& p : people) {
        std::vector<double> values;
        for (const auto& c : conds) {
          const auto* cell = table.cell(light, metric, c);
          if (!cell || !cell->count(p)) break;
          values.push_back(cell->at(p));
        }
        if (values.size() == k) {
          data.values.push_back(std::move(values));
        } else {
          excluded.push_back(p);
        }
      }
      if (!excluded.empty()) {
        report.warnings.push_back("friedman " + light + "/" + metric + ": excluded incomplete participants " +
                                  join(excluded));
      }
      omni.subjects = static_cast<int>(data.values.size());
      if (k < 2 || data.values.size() < 2) {
        omni.note = "insufficient data";
        report.warnings.push_back("friedman " + light + "/" + metric + ": skipped, needs 2 conditions and 2 subjects");
      } else {
        try {
          omni.test = stats::friedman(data);
        } catch (const DomainError&) {
          omni.test = null_report(omni.subjects, static_cast<double>(k - 1));
          omni.note = "no variation across conditions";
        }
      }
      report.omnibus.push_back(std::move(omni));

      std::vector<PairwiseRow> cell_rows;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
          PairwiseRow row{light, metric, conds[i], conds[j], 0, std::nullopt, 1.0, ""};
          const auto* a = table.cell(light, metric, conds[i]);
          const auto* b = table.cell(light, metric, conds[j]);
          std::vector<std::pair<double, double>> pairs;
          std::vector<std::string> missing;
          for (const auto& p : people) {
            if (a && b && a->count(p) && b->count(p)) {
              pairs.emplace_back(a->at(p), b->at(p));
            } else {
              missing.push_back(p);
            }
          }
          if (!missing.empty()) {
            report.warnings.push_back("wilcoxon " + light + "/" + metric + " " + conds[i] + " vs " + conds[j] +
                                      ": excluded incomplete participants " + join(missing));
          }
          row.pairs = static_cast<int>(pairs.size());
          if (pairs.empty()) {
            row.note = "insufficient data";
          } else {
            try {
              row.test = stats::wilcoxon_signed_rank(pairs);
            } catch (const DomainError&) {
              row.test = null_report(row.pairs, std::nullopt);
              row.note = "all differences are zero";
            }
          }
          cell_rows.push_back(std::move(row));
        }
      }
      int family = options.bonferroni_family == 0 ? static_cast<int>(cell_rows.size()) : options.bonferroni_family;
      if (family < static_cast<int>(cell_rows.size())) {
        report.warnings.push_back("bonferroni family " + std::to_string(family) + " is smaller than the " +
                                  std::to_string(cell_rows.size()) + " pairs of " + light + "/" + metric +
                                  "; using the pair count");
        family = static_cast<int>(cell_rows.size());
      }
      std::vector<double> raw;
      for (const auto& r : cell_rows) raw.push_back(r.test ? r.test->p_value : 1.0);
      if (!raw.empty()) {
        const auto adjusted = stats::bonferroni(raw, family);
        for (std::size_t i = 0; i < cell_rows.size(); ++i) cell_rows[i].p_adjusted = adjusted[i];
      }
      for (auto& r : cell_rows) report.pairwise.push_back(std::move(r));
    }
  }

  // Mann-Whitney between light levels.
  for (const auto& metric : report.metrics) {
    for (const auto& c : conds) {
      for (std::size_t i = 0; i < report.light_levels.size(); ++i) {
        for (std::size_t j = i + 1; j < report.light_levels.size(); ++j) {
          const auto& la = report.light_levels[i];
          const auto& lb = report.light_levels[j];
          LightComparisonRow row{metric, c, la, lb, 0, 0, std::nullopt, ""};
          std::vector<double> ga, gb;
          if (const auto* cell = table.cell(la, metric, c)) {
            for (const auto& [p, v] : *cell) ga.push_back(v);
          }
          if (const auto* cell = table.cell(lb, metric, c)) {
            for (const auto& [p, v] : *cell) gb.push_back(v);
          }
          row.n_a = static_cast<int>(ga.size());
          row.n_b = static_cast<int>(gb.size());
          if (ga.empty() || gb.empty()) {
            row.note = "insufficient data";
            report.warnings.push_back("mann-whitney " + metric + "/" + c + " " + la + " vs " + lb +
                                      ": skipped, a light level has no values");
          } else {
            row.test = stats::mann_whitney_u(ga, gb);
          }
          report.light_comparisons.push_back(std::move(row));
        }
      }
    }
  }

  // Theil-Sen of each device against the reference condition.
  if (conditions.count(options.reference_condition)) {
    for (const auto& light : report.light_levels) {
      for (const auto& metric : report.metrics) {
        const auto* ref = table.cell(light, metric, options.reference_condition);
        for (const auto& c : conds) {
          if (c == options.reference_condition) continue;
          const auto* dev = table.cell(light, metric, c);
          std::vector<double> x, y;
          if (ref && dev) {
            for (const auto& [p, v] : *dev) {
              if (auto it = ref->find(p); it != ref->end()) {
                x.push_back(it->second);
                y.push_back(v);
              }
            }
          }
          try {
            report.regressions.push_back(
                RegressionRow{light, metric, c, options.reference_condition, static_cast<int>(x.size()),
                              stats::theil_sen(x, y)});
          } catch (const DomainError& e) {
            report.warnings.push_back("regression " + light + "/" + metric + " " + c + " on " +
                                      options.reference_condition + ": skipped, " + e.what());
          }
        }
      }
    }
  } else {
    report.warnings.push_back("reference condition '" + options.reference_condition +
                              "' not present; regressions skipped");
  }

  // Covariance ellipses.
  const std::vector<std::pair<std::string, std::string>> metric_pairs = {
      {std::string(kMetricLogMar), std::string(kMetricLogCs)}, {std::string(kMetricLogMar), std::string(kMetricTes)}};
  for (const auto& [mx, my] : metric_pairs) {
    if (!metrics.count(mx) || !metrics.count(my)) continue;
    for (const auto& c : conds) {
      for (const auto& light : report.light_levels) {
        const auto* xs = table.cell(light, mx, c);
        const auto* ys = table.cell(light, my, c);
        std::vector<std::array<double, 2>> points;
        if (xs && ys) {
          for (const auto& [p, v] : *xs) {
            if (auto it = ys->find(p); it != ys->end()) points.push_back({v, it->second});
          }
        }
        try {
          report.ellipses.push_back(EllipseRow{c, light, mx, my, static_cast<int>(points.size()),
                                               stats::covariance_ellipse(points, options.ellipse_k_sigma)});
        } catch (const DomainError& e) {
          report.warnings.push_back("ellipse " + c + "/" + light + " " + mx + " x " + my + ": skipped, " + e.what());
        }
      }
    }
  }

  // Violin quantiles.
  for (const auto& light : report.light_levels) {
    for (const auto& c : conds) {
      for (const auto& metric : report.metrics) {
        const auto* cell = table.cell(light, metric, c);
        if (!cell || cell->empty()) continue;
        ViolinSeries v;
        v.light_level = light;
        v.condition = c;
        v.metric = metric;
        for (const auto& [p, value] : *cell) v.values.push_back(value);
        std::sort(v.values.begin(), v.values.end());
        v.min = v.values.front();
        v.q1 = quantile(v.values, 0.25);
        v.median = quantile(v.values, 0.5);
        v.q3 = quantile(v.values, 0.75);
        v.max = v.values.back();
        report.violins.push_back(std::move(v));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json test_json(const std::optional<stats::TestReport>& t) {
  if (!t) return nullptr;
  json j{{"statistic", t->statistic},
         {"p_value", t->p_value},
         {"method", stats::to_string(t->method)},
         {"n", t->n}};
  j["df"] = t->df ? json(*t->df) : json(nullptr);
  j["effect_size"] = t->effect_size ? json(*t->effect_size) : json(nullptr);
  j["z"] = t->z ? json(*t->z) : json(nullptr);
  j["p_value_approximate"] = t->p_value_approximate ? json(*t->p_value_approximate) : json(nullptr);
  j["statistic_a"] = t->statistic_a ? json(*t->statistic_a) : json(nullptr);
  j["statistic_b"] = t->statistic_b ? json(*t->statistic_b) : json(nullptr);
  return j;
}

json ellipse_json(const EllipseRow& e) {
  return json{{"condition", e.condition},
              {"light_level", e.light_level},
              {"metric_x", e.metric_x},
              {"metric_y", e.metric_y},
              {"points", e.points},
              {"center", e.geometry.center},
              {"semi_axes", e.geometry.semi_axes},
              {"orientation_rad", e.geometry.orientation},
              {"degenerate", e.geometry.degenerate}};
}

json regression_json(const RegressionRow& r) {
  return json{{"light_level", r.light_level}, {"metric", r.metric},       {"condition", r.condition},
              {"reference", r.reference},     {"pairs", r.pairs},         {"slope", r.fit.slope},
              {"intercept", r.fit.intercept}};
}

json violin_json(const ViolinSeries& v) {
  return json{{"light_level", v.light_level}, {"condition", v.condition}, {"metric", v.metric},
              {"n", v.values.size()},         {"min", v.min},             {"q1", v.q1},
              {"median", v.median},           {"q3", v.q3},               {"max", v.max},
              {"values", v.values}};
}

}  // namespace

json report_to_json(const Report& r) {
  json j;
  j["format"] = "visbench.report";
  j["schema_version"] = kReportVersion;
  j["options"] = json{{"bonferroni_family", r.options.bonferroni_family},
                      {"reference_condition", r.options.reference_condition},
                      {"alpha", r.options.alpha},
                      {"ellipse_k_sigma", r.options.ellipse_k_sigma}};
  j["conditions"] = r.conditions;
  j["light_levels"] = r.light_levels;
  j["metrics"] = r.metrics;
  j["omnibus"] = json::array();
  for (const auto& o : r.omnibus) {
    j["omnibus"].push_back(json{{"light_level", o.light_level},
                                {"metric", o.metric},
                                {"subjects", o.subjects},
                                {"test", test_json(o.test)},
                                {"significant", o.test && o.test->p_value < r.options.alpha},
                                {"note", o.note}});
  }
  j["pairwise"] = json::array();
  for (const auto& p : r.pairwise) {
    j["pairwise"].push_back(json{{"light_level", p.light_level},
                                 {"metric", p.metric},
                                 {"condition_a", p.condition_a},
                                 {"condition_b", p.condition_b},
                                 {"pairs", p.pairs},
                                 {"test", test_json(p.test)},
                                 {"p_adjusted", p.p_adjusted},
                                 {"significant", p.p_adjusted < r.options.alpha},
                                 {"stars", significance_stars(p.p_adjusted)},
                                 {"note", p.note}});
  }
  j["light_comparisons"] = json::array();
  for (const auto& m : r.light_comparisons) {
    j["light_comparisons"].push_back(json{{"metric", m.metric},
                                          {"condition", m.condition},
                                          {"light_a", m.light_a},
                                          {"light_b", m.light_b},
                                          {"n_a", m.n_a},
                                          {"n_b", m.n_b},
                                          {"test", test_json(m.test)},
                                          {"significant", m.test && m.test->p_value < r.options.alpha},
                                          {"note", m.note}});
  }
  j["regressions"] = json::array();
  for (const auto& x : r.regressions) j["regressions"].push_back(regression_json(x));
  j["ellipses"] = json::array();
  for (const auto& e : r.ellipses) j["ellipses"].push_back(ellipse_json(e));
  j["violins"] = json::array();
  for (const auto& v : r.violins) j["violins"].push_back(violin_json(v));
  j["warnings"] = r.warnings;
  return j;
}

json plot_series_json(const Report& r) {
  json j;
  j["format"] = "visbench.plot-series";
  j["schema_version"] = kReportVersion;
  j["violins"] = json::array();
  for (const auto& v : r.violins) j["violins"].push_back(violin_json(v));
  j["regression_lines"] = json::array();
  for (const auto& x : r.regressions) j["regression_lines"].push_back(regression_json(x));
  j["ellipses"] = json::array();
  for (const auto& e : r.ellipses) j["ellipses"].push_back(ellipse_json(e));
  return j;
}

// ---------------------------------------------------------------------------
// Text tables

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string compact(double v) {
  // Rank statistics are multiples of 0.5.
  if (std::abs(v * 2.0 - std::round(v * 2.0)) < 1e-9) {
    return std::abs(v - std::round(v)) < 1e-9 ? fixed(v, 0) : fixed(v, 1);
  }
  return fixed(v, 3);
}

std::string p_text(double p, bool stars) {
  std::string s = p < 0.001 ? "<0.001" : fixed(p, 3);
  if (stars) s += significance_stars(p);
  return s;
}

std::string render(const std::string& title, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  std::string out = title + "\n" + std::string(total, '-') + "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      line += rows[r][i] + std::string(width[i] - rows[r][i].size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) out += std::string(total, '-') + "\n";
  }
  return out;
}

}  // namespace

std::string render_tables(const Report& r) {
  std::string out;

  std::vector<std::vector<std::string>> friedman_rows{{"Light level", "Metric", "chi2", "df", "p-value", "W", "n"}};
  for (const auto& light : r.light_levels) {
    bool first = true;
    for (const auto& o : r.omnibus) {
      if (o.light_level != light) continue;
      std::vector<std::string> row{first ? light : "", o.metric};
      first = false;
      if (o.test) {
        row.push_back(fixed(o.test->statistic, 1));
        row.push_back(o.test->df ? compact(*o.test->df) : "");
        row.push_back(p_text(o.test->p_value, false));
        row.push_back(o.test->effect_size ? fixed(*o.test->effect_size, 3) : "");
      } else {
        row.insert(row.end(), {"-", "-", "-", "-"});
      }
      row.push_back(std::to_string(o.subjects));
      friedman_rows.push_back(std::move(row));
    }
  }
  out += render("Friedman tests across conditions", friedman_rows);
  out += "\n";

  std::vector<std::string> header{"Metric", "Pair"};
  for (const auto& light : r.light_levels) {
    header.push_back(light + " stat");
    header.push_back(light + " p-adj");
  }
  std::vector<std::vector<std::string>> pair_rows{header};
  for (const auto& metric : r.metrics) {
    bool first = true;
    for (std::size_t i = 0; i < r.conditions.size(); ++i) {
      for (std::size_t j = i + 1; j < r.conditions.size(); ++j) {
        std::vector<std::string> row{first ? metric : "", r.conditions[i] + " vs. " + r.conditions[j]};
        first = false;
        for (const auto& light : r.light_levels) {
          auto it = std::find_if(r.pairwise.begin(), r.pairwise.end(), [&](const PairwiseRow& p) {
            return p.light_level == light && p.metric == metric && p.condition_a == r.conditions[i] &&
                   p.condition_b == r.conditions[j];
          });
          if (it == r.pairwise.end() || !it->test) {
            row.insert(row.end(), {"-", "-"});
          } else {
            row.push_back(compact(it->test->statistic));
            row.push_back(p_text(it->p_adjusted, true));
          }
        }
        pair_rows.push_back(std::move(row));
      }
    }
  }
  std::string family = r.options.bonferroni_family == 0 ? "pairs per cell" : std::to_string(r.options.bonferroni_family);
  out += render("Wilcoxon signed-rank tests, Bonferroni adjusted (family " + family + ")", pair_rows);
  out += "\n";

  std::vector<std::vector<std::string>> mw_rows{{"Metric", "Condition", "Lights", "U", "p-value"}};
  for (const auto& metric : r.metrics) {
    bool first = true;
    for (const auto& m : r.light_comparisons) {
      if (m.metric != metric) continue;
      std::vector<std::string> row{first ? metric : "", m.condition, m.light_a + " vs. " + m.light_b};
      first = false;
      if (m.test) {
        row.push_back(compact(*m.test->statistic_a));
        row.push_back(p_text(m.test->p_value, false));
      } else {
        row.insert(row.end(), {"-", "-"});
      }
      mw_rows.push_back(std::move(row));
    }
  }
  out += render("Mann-Whitney U tests between light levels", mw_rows);

  if (!r.warnings.empty()) {
    out += "\nWarnings:\n";
    for (const auto& w : r.warnings) out += "  " + w + "\n";
  }
  return out;
}

}  // namespace visbench::analysis
