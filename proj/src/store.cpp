#include "visbench/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "visbench/serialization.hpp"

using nlohmann::json;

namespace visbench::service {
namespace {

constexpr int kStoreVersion = 1;

[[noreturn]] void fail(const std::string& what, const std::filesystem::path& path) {
  throw IoError(what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view text, const std::filesystem::path& path) {
  while (!text.empty()) {
    const ssize_t n = ::write(fd, text.data(), text.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      fail("write failed for", path);
    }
    text.remove_prefix(static_cast<std::size_t>(n));
  }
}

void sync_dir(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::Created: return "created";
    case SessionStatus::Running: return "running";
    case SessionStatus::Suspended: return "suspended";
    case SessionStatus::Complete: return "complete";
  }
  return "created";
}

SessionStatus session_status_from_string(std::string_view name) {
  if (name == "created") return SessionStatus::Created;
  if (name == "running") return SessionStatus::Running;
  if (name == "suspended") return SessionStatus::Suspended;
  if (name == "complete") return SessionStatus::Complete;
  throw ValidationError("status", "unknown session status '" + std::string(name) + "'");
}

void durable_replace(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) fail("cannot create", tmp);
  write_all(fd, text, tmp);
  if (::fsync(fd) != 0) {
    ::close(fd);
    fail("fsync failed for", tmp);
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) fail("cannot rename onto", path);
  sync_dir(path.parent_path());
}

void durable_append(const std::filesystem::path& path, std::string_view line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) fail("cannot open", path);
  write_all(fd, line, path);
  if (::fsync(fd) != 0) {
    ::close(fd);
    fail("fsync failed for", path);
  }
  ::close(fd);
}

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_ / "sessions", ec);
  if (ec) throw IoError("cannot create data directory " + (root_ / "sessions").string() + ": " + ec.message());
}

std::filesystem::path SessionStore::dir(const std::string& session_id) const {
  if (!safe_id(session_id)) throw ValidationError("session_id", "malformed session id");
  return root_ / "sessions" / session_id;
}

void SessionStore::write_meta(const SessionMeta& meta) {
  const auto d = dir(meta.session_id);
  std::error_code ec;
  std::filesystem::create_directories(d, ec);
  if (ec) throw IoError("cannot create " + d.string() + ": " + ec.message());
  json j{{"schema_version", kStoreVersion},
         {"session_id", meta.session_id},
         {"idempotency_key", meta.idempotency_key},
         {"request_fingerprint", meta.request_fingerprint},
         {"status", to_string(meta.status)},
         {"created_ms", meta.created_ms},
         {"plan", meta.plan}};
  durable_replace(d / "session.json", j.dump(2) + "\n");
}

void SessionStore::append_record(const std::string& session_id, const session::TrialRecord& record) {
  durable_append(dir(session_id) / "events.jsonl", json(record).dump() + "\n");
}

void SessionStore::write_snapshot(const std::string& session_id, const std::vector<session::TrialRecord>& records) {
  json j{{"schema_version", kStoreVersion}, {"record_count", records.size()}, {"records", records}};
  durable_replace(dir(session_id) / "snapshot.json", j.dump() + "\n");
}

StoredSession SessionStore::load(const std::string& session_id) {
  const auto d = dir(session_id);
  StoredSession out;
  try {
    const json meta = json::parse(read_file(d / "session.json"));
    out.meta.session_id = meta.at("session_id").get<std::string>();
    out.meta.idempotency_key = meta.value("idempotency_key", std::string());
    out.meta.request_fingerprint = meta.value("request_fingerprint", std::string());
    out.meta.status = session_status_from_string(meta.at("status").get<std::string>());
    out.meta.created_ms = meta.value("created_ms", std::int64_t{0});
    meta.at("plan").get_to(out.meta.plan);

    if (std::filesystem::exists(d / "snapshot.json")) {
      const json snap = json::parse(read_file(d / "snapshot.json"));
      snap.at("records").get_to(out.records);
    }
  } catch (const json::exception& e) {
    throw IoError("corrupt session files in " + d.string() + ": " + e.what());
  }

  if (std::filesystem::exists(d / "events.jsonl")) {
    const auto log_path = d / "events.jsonl";
    const std::string log = read_file(log_path);
    std::size_t start = 0;
    while (start < log.size()) {
      const auto end = log.find('\n', start);
      if (end == std::string::npos) {
        // Unterminated final line: the write never completed.
        out.warnings.push_back("dropped torn final log line in " + log_path.string());
        std::filesystem::resize_file(log_path, start);
        break;
      }
      const std::string line = log.substr(start, end - start);
      const bool last = end + 1 == log.size();
      const std::size_t line_start = start;
      start = end + 1;
      if (line.empty()) continue;
      session::TrialRecord rec;
      try {
        rec = json::parse(line).get<session::TrialRecord>();
      } catch (const std::exception& e) {
        if (last) {
          out.warnings.push_back("dropped torn final log line in " + log_path.string());
          std::filesystem::resize_file(log_path, line_start);
          break;
        }
        throw IoError("corrupt event log " + log_path.string() + ": " + e.what());
      }
      if (rec.sequence <= out.records.size()) continue;  // covered by the snapshot
      if (rec.sequence != out.records.size() + 1) {
        throw IoError("gap in event log " + log_path.string() + " at sequence " +
                      std::to_string(rec.sequence));
      }
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<StoredSession> SessionStore::load_all() {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(root_ / "sessions")) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "session.json")) {
      ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  std::vector<StoredSession> out;
  for (const auto& id : ids) out.push_back(load(id));
  return out;
}

}  // namespace visbench::service
