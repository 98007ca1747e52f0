#pragma once

// Session persistence formats.
//
// Structured: one JSON document {format, format_version, status, plan,
// records, result}. The result is recomputed from the records on export
// and checked against them on import.
//
// Tabular: CSV, one row per trial record, columns in kTabularColumns order.
// Level and timestamps are written in shortest round-trip form.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "visbench/session.hpp"

namespace visbench::session {

inline constexpr std::array<std::string_view, 14> kTabularColumns = {
    "sequence", "kind",  "participant_id", "condition_index", "device_label", "light_label",
    "illuminance_lux", "test", "level", "stimulus", "response", "correct", "wall_clock_ms", "monotonic_s"};

struct SessionDocument {
  SessionPlan plan;
  std::vector<TrialRecord> records;
  /// created / running / suspended / complete
  std::string status = "running";
};

/// Replays the records; throws ValidationError when they do not match the plan.
SessionResult result_of(const SessionDocument& doc);

std::string export_structured(const SessionDocument& doc);
SessionDocument import_structured(std::string_view text);

std::string export_tabular(const std::vector<TrialRecord>& records);
std::vector<TrialRecord> import_tabular(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace visbench::session
