#pragma once

// On-disk session store for the bench service.
//
// Layout under <root>/sessions/<session_id>/:
//   session.json    metadata and plan, replaced atomically on change
//   events.jsonl    one TrialRecord per line, fsync'd before returning
//   snapshot.json   all records up to some sequence, replaced atomically
//
// Loading reads the snapshot and then the log entries after it. A torn
// final log line (crash during a write) is dropped; it was never
// acknowledged.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "visbench/session.hpp"

namespace visbench::service {

enum class SessionStatus { Created, Running, Suspended, Complete };
std::string_view to_string(SessionStatus status);
SessionStatus session_status_from_string(std::string_view name);

struct SessionMeta {
  std::string session_id;
  std::string idempotency_key;
  /// Canonical request body, used to detect idempotency key reuse.
  std::string request_fingerprint;
  SessionStatus status = SessionStatus::Created;
  session::SessionPlan plan;
  std::int64_t created_ms = 0;
};

struct StoredSession {
  SessionMeta meta;
  std::vector<session::TrialRecord> records;
  std::vector<std::string> warnings;
};

/// Write to `path` durably: temp file, fsync, rename, fsync directory.
void durable_replace(const std::filesystem::path& path, std::string_view text);
/// Append one line and fsync.
void durable_append(const std::filesystem::path& path, std::string_view line);

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  void write_meta(const SessionMeta& meta);
  void append_record(const std::string& session_id, const session::TrialRecord& record);
  void write_snapshot(const std::string& session_id, const std::vector<session::TrialRecord>& records);

  /// Truncates a torn final log line in place.
  StoredSession load(const std::string& session_id);
  std::vector<StoredSession> load_all();

 private:
  std::filesystem::path dir(const std::string& session_id) const;
  std::filesystem::path root_;
};

}  // namespace visbench::service
