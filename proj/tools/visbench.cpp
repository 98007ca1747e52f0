// visbench command line: serve / simulate / calibrate / analyze / export.
//
// Exit codes: 0 ok, 1 usage, 2 runtime failure. Failures print one JSON
// line {"error":{"code":...,"message":...}} on stderr.

#include <pthread.h>
#include <signal.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "visbench/analysis.hpp"
#include "visbench/calibration.hpp"
#include "visbench/csv.hpp"
#include "visbench/errors.hpp"
#include "visbench/serialization.hpp"
#include "visbench/service.hpp"
#include "visbench/session_io.hpp"
#include "visbench/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace visbench;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Bad flag values detected after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw UsageError(e.field().empty() ? std::string(e.what()) : e.field() + ": " + e.what());
  }
}

int fail(int code, const std::string& error_code, const std::string& message) {
  std::cerr << json{{"error", {{"code", error_code}, {"message", message}}}}.dump() << "\n";
  return code;
}

std::vector<session::TestKind> parse_tests(const std::string& list) {
  std::vector<session::TestKind> tests;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) tests.push_back(session::test_kind_from_string(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return tests;
}

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    auto item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

bool looks_like_json(const std::string& text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '{' || c == '[';
  }
  return false;
}

bool header_is(const std::string& text, std::string_view first_column) {
  const auto end = text.find_first_of(",\r\n");
  return text.substr(0, end) == first_column;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir;
  std::vector<std::string> calibrations;
  std::string static_dir;
  std::size_t snapshot_interval = 50;
};

int run_serve(const ServeArgs& args) {
  std::vector<calibration::CalibrationProfile> profiles;
  for (const auto& path : args.calibrations) profiles.push_back(calibration::load_profile(path));
  if (profiles.empty()) profiles.push_back(calibration::reference_profile());

  // Block termination signals before any thread starts; a dedicated
  // thread waits for them and stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  session::SystemClock clock;
  const fs::path data_dir =
      service::resolve_data_dir(args.data_dir.empty() ? std::nullopt : std::optional<fs::path>(args.data_dir));
  service::BenchService bench(service::ServiceConfig{data_dir, args.snapshot_interval}, profiles, clock);
  for (const auto& w : bench.load_warnings()) std::cerr << "warning: " << w << "\n";
  std::optional<fs::path> static_dir;
  if (!args.static_dir.empty()) static_dir = args.static_dir;
  service::HttpServer server(bench, static_dir);
  const int port = server.bind(args.host, args.port);
  std::cout << json{{"listening", args.host + ":" + std::to_string(port)}, {"data_dir", data_dir.string()}}.dump()
            << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::vector<std::string> observers;
  std::vector<std::string> lights;
  int sessions = 1;
  std::uint64_t seed = 0;
  std::string calibration;
  std::string tests = "acuity,contrast,hue";
  double participant_sd = 0.0;
  double hue_min_seconds = 480.0;
  std::string output;
  std::string format = "results";
};

int run_simulate(const SimulateArgs& args) {
  simulation::SimulationConfig config;
  as_usage([&] {
    for (const auto& spec : args.observers) config.devices.push_back(simulation::parse_device_spec(spec));
    for (const auto& spec : args.lights) config.lights.push_back(simulation::parse_light_spec(spec));
    config.tests = parse_tests(args.tests);
    config.sessions = args.sessions;
    config.seed = args.seed;
    config.participant_sd = args.participant_sd;
    config.options.hue_min_seconds = args.hue_min_seconds;
    if (config.tests.empty()) throw ValidationError("tests", "at least one test is required");
    return 0;
  });
  if (!args.calibration.empty()) config.calibration = calibration::load_profile(args.calibration);
  const auto out = simulation::simulate(config);

  if (args.output.empty()) {
    std::cout << analysis::format_results_csv(out.rows);
    return 0;
  }
  const fs::path dir = args.output;
  ensure_dir(dir);
  session::write_text_file(dir / "results.csv", analysis::format_results_csv(out.rows));
  std::vector<session::TrialRecord> all;
  for (const auto& s : out.sessions) all.insert(all.end(), s.records.begin(), s.records.end());
  session::write_text_file(dir / "trials.csv", session::export_tabular(all));
  if (args.format == "structured") {
    ensure_dir(dir / "sessions");
    for (const auto& s : out.sessions) {
      session::SessionDocument doc{s.plan, s.records, "complete"};
      session::write_text_file(dir / "sessions" / (s.plan.participant_id + ".json"), session::export_structured(doc));
    }
  }
  std::cout << json{{"sessions", out.sessions.size()}, {"rows", out.rows.size()}, {"output", dir.string()}}.dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string input;
  std::string output;
  std::string id = "calibration";
  int degree = calibration::kDefaultFitDegree;
  int width_px = 1440;
  int height_px = 2960;
  double ppi = 523.0;
  double distance_mm = 1000.0;
  int min_letter_px = 5;
  std::optional<double> measured_min_logmar;
  double brightness = 1.0;
};

int run_calibrate(const CalibrateArgs& args) {
  const auto samples = calibration::load_samples(args.input);
  const auto curve = calibration::fit_luminance_curve(samples, args.degree);
  const auto geometry = calibration::DisplayGeometry::from_ppi(args.width_px, args.height_px, args.ppi, args.distance_mm);
  const auto profile = calibration::make_profile(args.id, geometry, curve, args.min_letter_px,
                                                 args.measured_min_logmar, args.brightness);
  if (!args.output.empty()) {
    calibration::save_profile(profile, args.output);
  } else {
    std::cout << calibration::profile_to_json(profile);
  }
  json summary{{"id", profile.id},
               {"coefficients", curve.coefficients},
               {"residual_rms", curve.residual_rms},
               {"min_renderable_logmar", profile.effective_min_logmar()},
               {"negative_prediction_warning", curve.negative_prediction_warning}};
  (args.output.empty() ? std::cerr : std::cout) << summary.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string format = "tabular";
  std::string reference = "naked-eyes";
  int family = 6;
  std::string condition_order;
  std::string light_order;
  double ellipse_k = 1.0;
};

std::vector<analysis::ResultRow> load_result_rows(const std::vector<std::string>& inputs) {
  std::vector<analysis::ResultRow> rows;
  auto add_document = [&](const fs::path& path) {
    const auto doc = session::import_structured(session::read_text_file(path));
    auto more = analysis::rows_from_result(session::result_of(doc));
    rows.insert(rows.end(), more.begin(), more.end());
  };
  for (const auto& input : inputs) {
    const fs::path path = input;
    if (fs::is_directory(path)) {
      std::vector<fs::path> docs;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.path().extension() == ".json") docs.push_back(e.path());
      }
      std::sort(docs.begin(), docs.end());
      for (const auto& d : docs) add_document(d);
      continue;
    }
    const std::string text = session::read_text_file(path);
    if (looks_like_json(text)) {
      add_document(path);
    } else if (header_is(text, "participant")) {
      auto more = analysis::parse_results_csv(text);
      rows.insert(rows.end(), more.begin(), more.end());
    } else {
      throw ValidationError("input", path.string() +
                                         " is neither a results table nor a structured session document; trial "
                                         "exports need their plan, convert them with `export` first");
    }
  }
  return rows;
}

int run_analyze(const AnalyzeArgs& args) {
  analysis::AnalysisOptions options;
  options.reference_condition = args.reference;
  options.bonferroni_family = args.family;
  options.condition_order = split_list(args.condition_order);
  options.light_order = split_list(args.light_order);
  options.ellipse_k_sigma = args.ellipse_k;
  const auto report = analysis::analyze_benchmark(load_result_rows(args.inputs), options);
  const auto report_json = analysis::report_to_json(report);
  const auto tables = analysis::render_tables(report);
  if (args.output.empty()) {
    if (args.format == "structured") {
      std::cout << report_json.dump(2) << "\n";
    } else {
      std::cout << tables;
    }
    return 0;
  }
  const fs::path dir = args.output;
  ensure_dir(dir);
  session::write_text_file(dir / "report.json", report_json.dump(2) + "\n");
  session::write_text_file(dir / "plot_series.json", analysis::plot_series_json(report).dump(2) + "\n");
  session::write_text_file(dir / "tables.txt", tables);
  std::cout << json{{"output", dir.string()}, {"warnings", report.warnings.size()}}.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string input;
  std::string output;
  std::string format = "tabular";
  std::string plan;
};

session::SessionPlan load_plan(const fs::path& path) {
  const json j = json::parse(session::read_text_file(path));
  if (j.contains("format") && j.contains("plan")) return j.at("plan").get<session::SessionPlan>();
  return j.get<session::SessionPlan>();
}

int run_export(const ExportArgs& args) {
  const std::string text = session::read_text_file(args.input);
  session::SessionDocument doc;
  if (looks_like_json(text)) {
    doc = session::import_structured(text);
  } else if (header_is(text, "sequence")) {
    if (args.plan.empty()) {
      throw UsageError("a trial table carries no plan; pass --plan with the session plan or document");
    }
    doc.plan = load_plan(args.plan);
    doc.records = session::import_tabular(text);
    doc.status = session::result_of(doc).complete ? "complete" : "suspended";
  } else {
    throw ValidationError("input", args.input + " is not a session document or trial table");
  }

  std::string out;
  if (args.format == "structured") {
    out = session::export_structured(doc);
  } else if (args.format == "tabular") {
    out = session::export_tabular(doc.records);
  } else {
    out = analysis::format_results_csv(analysis::rows_from_result(session::result_of(doc)));
  }
  if (args.output.empty()) {
    std::cout << out;
  } else {
    session::write_text_file(args.output, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual perception benchmark: sessions, simulation, calibration and analysis", "visbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(session::kArtifactVersion));

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  serve_cmd->add_option("--port", serve.port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--data-dir", serve.data_dir, "Session storage (default $VISBENCH_DATA_DIR)");
  serve_cmd->add_option("--calibration", serve.calibrations, "Calibration profile JSON (repeatable)")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--static-dir", serve.static_dir, "Console assets to serve at /")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--snapshot-interval", serve.snapshot_interval, "Records between snapshots")
      ->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run seeded sessions with simulated observers");
  sim_cmd->add_option("--observers", sim.observers, "Device observer KIND:ACUITY[:SLOPE][,cs=..][,hue=..][,label=..]")
      ->required();
  sim_cmd->add_option("--light", sim.lights, "Light level LABEL:LUX[:SHIFT] (repeatable)");
  sim_cmd->add_option("--sessions", sim.sessions, "Number of virtual participants")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Root seed");
  sim_cmd->add_option("--calibration", sim.calibration, "Calibration profile JSON")->check(CLI::ExistingFile);
  sim_cmd->add_option("--tests", sim.tests, "Comma separated tests");
  sim_cmd->add_option("--participant-sd", sim.participant_sd, "SD of per-participant threshold offsets")
      ->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--hue-min-seconds", sim.hue_min_seconds, "Hue submission gate")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--output", sim.output, "Output directory (default: results table on stdout)");
  sim_cmd->add_option("--format", sim.format, "results or structured (adds session documents)")
      ->check(CLI::IsMember({"results", "structured"}));

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit a luminance curve and write a calibration profile");
  cal_cmd->add_option("--input", cal.input, "Grayscale/luminance sample file")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--output", cal.output, "Profile JSON path (default stdout)");
  cal_cmd->add_option("--id", cal.id, "Profile id");
  cal_cmd->add_option("--degree", cal.degree, "Polynomial degree")->check(CLI::Range(1, 8));
  cal_cmd->add_option("--width-px", cal.width_px, "Display width in pixels")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--height-px", cal.height_px, "Display height in pixels")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--ppi", cal.ppi, "Pixels per inch")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--distance-mm", cal.distance_mm, "Viewing distance")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--min-letter-px", cal.min_letter_px, "Smallest renderable letter")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--measured-min-logmar", cal.measured_min_logmar, "Pilot-measured acuity floor");
  cal_cmd->add_option("--brightness", cal.brightness, "Brightness setting in [0,1]")->check(CLI::Range(0.0, 1.0));

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "Run the benchmark statistics on a results table");
  an_cmd->add_option("--input", an.inputs, "Results CSV, session document or directory of documents")
      ->required()
      ->check(CLI::ExistingPath);
  an_cmd->add_option("--output", an.output, "Output directory for report.json, plot_series.json, tables.txt");
  an_cmd->add_option("--format", an.format, "stdout format: tabular or structured")
      ->check(CLI::IsMember({"tabular", "structured"}));
  an_cmd->add_option("--reference", an.reference, "Reference condition for regressions");
  an_cmd->add_option("--family", an.family, "Bonferroni family size (0: pairs per cell)")->check(CLI::NonNegativeNumber);
  an_cmd->add_option("--condition-order", an.condition_order, "Comma separated display order");
  an_cmd->add_option("--light-order", an.light_order, "Comma separated display order");
  an_cmd->add_option("--ellipse-k", an.ellipse_k, "Ellipse scale in standard deviations")->check(CLI::PositiveNumber);

  ExportArgs ex;
  auto* ex_cmd = app.add_subcommand("export", "Convert between structured and tabular session formats");
  ex_cmd->add_option("--input", ex.input, "Session document or trial table")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--output", ex.output, "Output path (default stdout)");
  ex_cmd->add_option("--format", ex.format, "structured, tabular or results")
      ->check(CLI::IsMember({"structured", "tabular", "results"}));
  ex_cmd->add_option("--plan", ex.plan, "Plan or session document for trial-table input")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, "usage", e.what());
  }

  try {
    if (serve_cmd->parsed()) return run_serve(serve);
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (cal_cmd->parsed()) return run_calibrate(cal);
    if (an_cmd->parsed()) return run_analyze(an);
    if (ex_cmd->parsed()) return run_export(ex);
  } catch (const UsageError& e) {
    return fail(kExitUsage, "usage", e.what());
  } catch (const ValidationError& e) {
    return fail(kExitRuntime, e.code(), e.field().empty() ? e.what() : e.field() + ": " + e.what());
  } catch (const Error& e) {
    return fail(kExitRuntime, e.code(), e.what());
  } catch (const json::exception& e) {
    return fail(kExitRuntime, "malformed_json", e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, "internal", e.what());
  }
  return fail(kExitUsage, "usage", "no command given");
}
