// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances and time budgets are fixed below.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "visbench/calibration.hpp"
#include "visbench/hue.hpp"
#include "visbench/metrics.hpp"
#include "visbench/observer.hpp"
#include "visbench/random.hpp"
#include "visbench/session_io.hpp"
#include "visbench/staircase.hpp"
#include "visbench/stats.hpp"

#include "oracles.hpp"

using namespace visbench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kAcuityTol = 1e-9;
constexpr double kLogCsTol = 1e-12;
constexpr double kOracleTol = 1e-12;
constexpr double kConvergenceTol = 0.02;
constexpr std::size_t kMinAcuityTrials = 40;
constexpr std::size_t kMaxAcuityTrials = 120;
constexpr double kPolyTol = 1e-6;
constexpr double kEllipseTol = 1e-9;
constexpr double kWorstDeviceAlpha = 0.01;

// Collects failure messages for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double actual, double expected, double tol, const std::string& what) {
    if (!(std::abs(actual - expected) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << actual << ", want " << expected << " +/- " << tol;
      failures.push_back(s.str());
    }
  }
};

int failed = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > budget_s) c.failures.push_back("took " + std::to_string(s) + " s, budget " + std::to_string(budget_s) + " s");
  std::ostringstream line;
  line.precision(3);
  line << (c.failures.empty() ? "PASS " : "FAIL ") << name << " (" << std::fixed << s << " s)";
  for (const auto& f : c.failures) line << "\n    " << f;
  std::cout << line.str() << std::endl;
  if (!c.failures.empty()) ++failed;
}

int run_command(const std::string& cmd, std::string* out = nullptr) {
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    if (out) out->append(buf.data(), n);
  }
  const int status = pclose(pipe);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void metric_fidelity(Check& c) {
  const auto r = metrics::acuity_from_logmar(std::log10(2.0));
  c.near(r.decimal, 0.5, kAcuityTol, "decimal of 20/40");
  c.near(r.snellen_denominator, 40.0, kAcuityTol, "Snellen denominator");
  c.expect(metrics::snellen_string(r) == "20/40", "Snellen string is " + metrics::snellen_string(r));
  c.near(r.logmar, 0.30103, 1e-5, "logMAR of 20/40 (5 decimals)");
  // From the gap angle: 2 arcmin gap at 6 m.
  const double gap = metrics::object_size_for_angle(metrics::VisualAngle::from_arcmin(2.0), 6000.0);
  const auto g = metrics::acuity_from_gap_angle(metrics::visual_angle(gap, 6000.0));
  c.near(g.logmar, std::log10(2.0), kAcuityTol, "logMAR from 2 arcmin gap");
  c.near(g.decimal, 0.5, kAcuityTol, "decimal from 2 arcmin gap");
  c.near(metrics::contrast_result_from_threshold(-0.01).log_cs, 2.0, kLogCsTol, "logCS of 1% threshold");
  c.near(metrics::contrast_result_from_threshold(0.01).log_cs, 2.0, kLogCsTol, "logCS of +1% threshold");
}

void tes_oracle(Check& c) {
  const auto worked = hue::score(hue::HueArrangement({{1, 15, 10, 16, 20}}));
  c.expect(worked.per_cap_error.at(10) == 9, "cap 10 between 15 and 16 scores " +
                                                 std::to_string(worked.per_cap_error.at(10)));
  std::vector<int> interior{2, 3, 4, 5, 6, 7};
  int permutations = 0, mismatches = 0, zeros = 0;
  do {
    std::vector<int> group{1};
    group.insert(group.end(), interior.begin(), interior.end());
    group.push_back(8);
    const int got = hue::score(hue::HueArrangement({group})).total;
    if (got != oracle::oracle_tes(group)) ++mismatches;
    if (got == 0) ++zeros;
    ++permutations;
  } while (std::next_permutation(interior.begin(), interior.end()));
  c.expect(permutations == 720, "enumerated " + std::to_string(permutations) + " permutations");
  c.expect(mismatches == 0, std::to_string(mismatches) + " permutations disagree with the oracle");
  c.expect(zeros == 1, std::to_string(zeros) + " arrangements score zero");
  const auto sorted = hue::score(hue::HueArrangement::identity(hue::default_groups()));
  c.expect(sorted.total == 0, "sorted full board scores " + std::to_string(sorted.total));
}

void staircase_convergence(Check& c) {
  struct Case {
    staircase::StaircaseConfig config;
    double lo, hi;
    bool acuity;
  };
  const std::vector<Case> cases{{staircase::acuity_config(), -0.3, 0.8, true},
                                {staircase::contrast_config(), 0.005, 0.5, false}};
  for (const auto& k : cases) {
    int good = 0;
    std::size_t min_trials = 1u << 30, max_trials = 0;
    int outside = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      observer::ObserverModel m;
      m.kind = observer::ObserverKind::Step;
      m.true_threshold = k.lo + (k.hi - k.lo) * rng.uniform();
      m.guess_rate = 0.0;
      m.seed = seed;
      observer::SimObserver obs(m);
      auto s = staircase::start(k.config);
      while (s.status() == staircase::Status::Running) {
        s = staircase::submit_response(s, obs.respond(s.current_level()));
      }
      const double err = std::abs(staircase::threshold_estimate(s) - m.true_threshold);
      const double half = std::abs(s.bracket_easy() - s.bracket_hard()) / 2.0;
      worst = std::max(worst, err);
      if (err <= half + 1e-12 && err <= kConvergenceTol) ++good;
      const auto n = staircase::trial_count(s);
      min_trials = std::min(min_trials, n);
      max_trials = std::max(max_trials, n);
      if (n < kMinAcuityTrials || n > kMaxAcuityTrials) ++outside;
    }
    const std::string name = k.acuity ? "acuity" : "contrast";
    c.expect(good == 100, name + ": " + std::to_string(good) + "/100 within tolerance, worst error " +
                              std::to_string(worst));
    if (k.acuity) {
      c.expect(outside == 0, "acuity trials span [" + std::to_string(min_trials) + ", " + std::to_string(max_trials) +
                                 "], " + std::to_string(outside) + "/100 runs outside [" +
                                 std::to_string(kMinAcuityTrials) + ", " + std::to_string(kMaxAcuityTrials) + "]");
    }
  }
}

void statistics_oracles(Check& c) {
  const std::vector<std::vector<double>> fr{{1.0, 2.5, 3.1}, {2.0, 2.2, 1.7}, {0.4, 3.3, 2.8}};
  const auto f = stats::friedman({fr, {}});
  c.near(f.p_value, oracle::friedman_oracle_p(fr), kOracleTol, "Friedman n=3,k=3 exact p");
  c.near(f.statistic, oracle::friedman_oracle_chi2(fr), kOracleTol, "Friedman chi2");

  const std::vector<double> diffs{0.7, -0.2, 1.3, 0.4, -0.9};
  std::vector<std::pair<double, double>> pairs;
  for (double d : diffs) pairs.emplace_back(5.0 + d, 5.0);
  c.near(stats::wilcoxon_signed_rank(pairs).p_value, oracle::wilcoxon_oracle_p(diffs), kOracleTol,
         "Wilcoxon m=5 exact p");

  const std::vector<double> a{1.2, 3.4, 2.2, 5.1}, b{4.4, 6.0, 2.9, 7.3};
  const auto mw = stats::mann_whitney_u(a, b);
  const auto [ua, pw] = oracle::mann_whitney_oracle(a, b);
  c.near(mw.p_value, pw, kOracleTol, "Mann-Whitney 4+4 exact p");
  c.near(*mw.statistic_a, ua, kOracleTol, "Mann-Whitney U_a");

  const std::vector<double> raw{0.0005};
  const double adjusted = stats::bonferroni(raw, 6).front();
  c.near(adjusted, 0.003, 1e-15, "Bonferroni 0.0005 x 6");
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", adjusted);
  c.expect(std::string(buf) == "0.003", std::string("rendered as ") + buf);

  std::vector<double> x, y;
  for (int i = 0; i < 9; ++i) {
    x.push_back(i);
    y.push_back(0.5 * i - 1.0);
  }
  x.push_back(9);
  y.push_back(1000.0);
  const auto fit = stats::theil_sen(x, y);
  c.expect(fit.slope == 0.5, "Theil-Sen slope with outlier is " + std::to_string(fit.slope));
}

void calibration_and_ellipse(Check& c) {
  std::vector<calibration::LuminanceSample> samples;
  for (int i = 0; i <= 16; ++i) {
    const double g = i / 16.0;
    samples.push_back({g, 0.4 + 1.5 * g - 0.8 * g * g + 2.2 * g * g * g});
  }
  const auto curve = calibration::fit_luminance_curve(samples, 3);
  const std::array<double, 4> want{0.4, 1.5, -0.8, 2.2};
  for (std::size_t i = 0; i < 4; ++i) {
    c.near(curve.coefficients.at(i), want[i], kPolyTol, "coefficient " + std::to_string(i));
  }
  c.expect(calibration::grayscale_to_weber(1.0, curve) == 0.0, "grayscale_to_weber(1) is not exactly 0");
  c.expect(calibration::grayscale_to_weber(1.0, calibration::reference_profile().curve) == 0.0,
           "reference grayscale_to_weber(1) is not exactly 0");

  // Sample variances 4 and 1 along the axes.
  const double ax = std::sqrt(6.0), by = std::sqrt(1.5);
  const std::vector<std::array<double, 2>> pts{{ax, 0}, {-ax, 0}, {0, by}, {0, -by}};
  const auto e = stats::covariance_ellipse(pts);
  c.near(e.semi_axes[0], 2.0, kEllipseTol, "major semi-axis");
  c.near(e.semi_axes[1], 1.0, kEllipseTol, "minor semi-axis");
}

void end_to_end(Check& c) {
  const fs::path dir = fs::temp_directory_path() / "visbench_acceptance";
  fs::remove_all(dir);
  const std::string bin = VISBENCH_BIN;
  const std::string sim =
      bin + " simulate"
            " --observers step:-0.1,cs=0.005,hue=0.5,label=naked-eyes"
            " --observers step:0.1,cs=0.01,hue=1,label=vision-pro"
            " --observers step:0.3,cs=0.03,hue=2,label=quest-pro"
            " --observers step:0.6,cs=0.08,hue=5,label=quest-3"
            " --light normal:572 --light low:117:0.1"
            " --sessions 24 --participant-sd 0.05 --seed 2024 --format structured"
            " --output " + (dir / "sim").string();
  c.expect(run_command(sim) == 0, "simulate failed");
  const std::string an = bin + " analyze --input " + (dir / "sim" / "results.csv").string() +
                         " --family 6 --light-order normal,low --condition-order quest-3,quest-pro,vision-pro,naked-eyes"
                         " --output " + (dir / "report").string();
  c.expect(run_command(an) == 0, "analyze failed");
  if (!c.failures.empty()) return;

  const auto report = json::parse(session::read_text_file(dir / "report" / "report.json"));
  const auto& pairwise = report.at("pairwise");
  int worst_pairs = 0;
  for (const auto& p : pairwise) {
    if (p.at("condition_a") != "quest-3" && p.at("condition_b") != "quest-3") continue;
    ++worst_pairs;
    const double padj = p.at("p_adjusted").get<double>();
    c.expect(padj < kWorstDeviceAlpha, p.at("light_level").get<std::string>() + "/" + p.at("metric").get<std::string>() +
                                           " " + p.at("condition_a").get<std::string>() + " vs " +
                                           p.at("condition_b").get<std::string>() + ": p_adj " + std::to_string(padj));
  }
  c.expect(worst_pairs == 2 * 3 * 3, "worst-device comparisons: " + std::to_string(worst_pairs));

  // Shape: Friedman per light x metric, six pairs per cell, Mann-Whitney per metric x device.
  const auto& omnibus = report.at("omnibus");
  c.expect(omnibus.size() == 6, "omnibus rows: " + std::to_string(omnibus.size()));
  for (const auto& o : omnibus) {
    c.expect(o.at("subjects") == 12, "omnibus subjects " + o.at("subjects").dump());
    c.expect(o.at("test").at("df") == 3, "omnibus df " + o.at("test").at("df").dump());
  }
  c.expect(pairwise.size() == 36, "pairwise rows: " + std::to_string(pairwise.size()));
  c.expect(report.at("light_comparisons").size() == 12,
           "light comparison rows: " + std::to_string(report.at("light_comparisons").size()));
  c.expect(report.at("warnings").empty(), "warnings: " + report.at("warnings").dump());
  const std::string tables = session::read_text_file(dir / "report" / "tables.txt");
  const std::vector<std::pair<std::string, std::vector<std::string>>> sections{
      {"Friedman tests across conditions", {"Light level", "Metric", "chi2", "df", "p-value", "W", "n"}},
      {"Wilcoxon signed-rank tests, Bonferroni adjusted (family 6)", {"Metric", "Pair", "normal p-adj", "low p-adj"}},
      {"Mann-Whitney U tests between light levels", {"Metric", "Condition", "Lights", "U", "p-value"}}};
  for (const auto& [title, columns] : sections) {
    const auto at = tables.find(title);
    if (at == std::string::npos) {
      c.expect(false, "tables.txt lacks section: " + title);
      continue;
    }
    // Column header is the first line after the rule under the title.
    std::istringstream in(tables.substr(at));
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::getline(in, line);
    std::size_t pos = 0;
    for (const auto& col : columns) {
      pos = line.find(col, pos);
      c.expect(pos != std::string::npos, title + ": column '" + col + "' missing or out of order");
      if (pos == std::string::npos) break;
    }
  }
  c.expect(tables.find("0.003**") != std::string::npos, "no 0.003** entry in the pairwise table");
  c.expect(fs::exists(dir / "report" / "plot_series.json"), "plot_series.json missing");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  criterion("metric-fidelity", 1.0, metric_fidelity);
  criterion("tes-oracle", 1.0, tes_oracle);
  criterion("staircase-convergence", 10.0, staircase_convergence);
  criterion("statistics-oracles", 5.0, statistics_oracles);
  criterion("calibration", 1.0, calibration_and_ellipse);
  criterion("end-to-end", 60.0, end_to_end);
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
