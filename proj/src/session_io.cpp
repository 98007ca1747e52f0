#include "visbench/session_io.hpp"

#include <fstream>
#include <sstream>

#include "visbench/csv.hpp"
#include "visbench/serialization.hpp"

using nlohmann::json;

namespace visbench::session {

SessionResult result_of(const SessionDocument& doc) {
  ManualClock clock;
  return SessionRunner::restore(doc.plan, doc.records, clock).result();
}

std::string export_structured(const SessionDocument& doc) {
  json j{{"format", "visbench.session"},
         {"format_version", kFormatVersion},
         {"status", doc.status},
         {"plan", doc.plan},
         {"records", doc.records},
         {"result", result_of(doc)}};
  return j.dump(2) + "\n";
}

SessionDocument import_structured(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("document", std::string("malformed session document: ") + e.what());
  }
  expect_keys(j, {"format", "format_version", "status", "plan", "records", "result"}, "document");
  if (j.value("format", std::string()) != "visbench.session") {
    throw ValidationError("format", "not a visbench session document");
  }
  if (j.value("format_version", 0) != kFormatVersion) {
    throw ValidationError("format_version", "unsupported session format version");
  }
  SessionDocument doc;
  try {
    j.at("plan").get_to(doc.plan);
    j.at("records").get_to(doc.records);
    doc.status = j.value("status", std::string("running"));
  } catch (const json::exception& e) {
    throw ValidationError("document", std::string("malformed session document: ") + e.what());
  }
  if (j.contains("result") && json(result_of(doc)) != j.at("result")) {
    throw ValidationError("result", "stored result does not match the trial records");
  }
  return doc;
}

std::string export_tabular(const std::vector<TrialRecord>& records) {
  std::string out = csv::format_row(csv::Row(kTabularColumns.begin(), kTabularColumns.end()));
  for (const auto& r : records) {
    out += csv::format_row({std::to_string(r.sequence), std::string(to_string(r.kind)), r.participant_id,
                            std::to_string(r.condition_index), r.condition.device_label,
                            r.condition.light_level.label, csv::format_double(r.condition.light_level.illuminance_lux),
                            std::string(to_string(r.test)), r.level ? csv::format_double(*r.level) : "",
                            r.stimulus, r.response, r.correct ? (*r.correct ? "1" : "0") : "",
                            std::to_string(r.wall_clock_ms), csv::format_double(r.monotonic_s)});
  }
  return out;
}

std::vector<TrialRecord> import_tabular(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ValidationError("header", "tabular export is empty");
  if (rows.front() != csv::Row(kTabularColumns.begin(), kTabularColumns.end())) {
    throw ValidationError("header", "unexpected column layout in tabular export");
  }
  std::vector<TrialRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != kTabularColumns.size()) {
      throw ValidationError("row", "row " + std::to_string(i) + " has " + std::to_string(row.size()) + " fields");
    }
    TrialRecord r;
    r.sequence = std::stoull(row[0]);
    r.kind = record_kind_from_string(row[1]);
    r.participant_id = row[2];
    r.condition_index = std::stoull(row[3]);
    r.condition.device_label = row[4];
    r.condition.light_level.label = row[5];
    r.condition.light_level.illuminance_lux = csv::parse_double(row[6], "illuminance_lux");
    r.test = test_kind_from_string(row[7]);
    if (!row[8].empty()) r.level = csv::parse_double(row[8], "level");
    r.stimulus = row[9];
    r.response = row[10];
    if (row[11] == "1") {
      r.correct = true;
    } else if (row[11] == "0") {
      r.correct = false;
    } else if (!row[11].empty()) {
      throw ValidationError("correct", "correct must be 0, 1 or empty");
    }
    r.wall_clock_ms = std::stoll(row[12]);
    r.monotonic_s = csv::parse_double(row[13], "monotonic_s");
    records.push_back(std::move(r));
  }
  return records;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace visbench::session
