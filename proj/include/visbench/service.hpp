#pragma once

// Bench service: session lifecycle API for the operator console.
//
// BenchService is transport independent; `handle()` maps one request
// (method, target, body) to a status code and a JSON body. HttpServer
// binds it to HTTP and optionally serves the console's static files.
//
// Endpoints (all bodies carry "schema_version": 1):
//   GET  /v1/health
//   GET  /v1/calibrations
//   GET  /v1/sessions
//   POST /v1/sessions                      create, 201
//   GET  /v1/sessions/{id}
//   POST /v1/sessions/{id}/start | suspend | resume
//   GET  /v1/sessions/{id}/stimulus
//   POST /v1/sessions/{id}/responses
//   GET  /v1/sessions/{id}/results
//   GET  /v1/sessions/{id}/export?format=structured|tabular
// Errors: {"schema_version":1,"error":{"code","message","field"}}.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "visbench/calibration.hpp"
#include "visbench/session.hpp"
#include "visbench/store.hpp"

namespace httplib {
class Server;
}

namespace visbench::service {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kDataDirEnv = "VISBENCH_DATA_DIR";

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
  /// Set for non-JSON payloads (tabular export).
  std::optional<std::string> raw_body;
  std::string content_type = "application/json";
};

struct ServiceConfig {
  std::filesystem::path data_dir;
  std::size_t snapshot_interval = 50;
};

/// `--data-dir` wins, then VISBENCH_DATA_DIR, then ./visbench-data.
std::filesystem::path resolve_data_dir(const std::optional<std::filesystem::path>& flag);

class BenchService {
 public:
  /// Reloads every persisted session. The first calibration is the
  /// default for create requests without calibration_id.
  BenchService(ServiceConfig config, std::vector<calibration::CalibrationProfile> calibrations,
               session::Clock& clock);
  ~BenchService();

  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body);

  /// Problems found while loading persisted sessions.
  const std::vector<std::string>& load_warnings() const noexcept { return load_warnings_; }

 private:
  struct Live;

  HttpResponse route(std::string_view method, std::string_view path, std::string_view query, std::string_view body);
  HttpResponse create_session(const nlohmann::json& request);
  HttpResponse list_sessions();
  HttpResponse transition(const std::string& id, std::string_view action);
  HttpResponse describe(const std::string& id);
  HttpResponse stimulus(const std::string& id);
  HttpResponse submit(const std::string& id, const nlohmann::json& request);
  HttpResponse results(const std::string& id);
  HttpResponse export_session(const std::string& id, std::string_view query);

  std::shared_ptr<Live> find(const std::string& id);
  std::shared_ptr<Live> restore_live(StoredSession stored);
  void attach_runner(Live& live, const std::vector<session::TrialRecord>* records);
  nlohmann::json progress_json(Live& live);
  std::string new_session_id();

  ServiceConfig config_;
  std::vector<calibration::CalibrationProfile> calibrations_;
  session::Clock* clock_;
  SessionStore store_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::map<std::string, std::string> idempotency_;
  std::mutex id_mutex_;
  std::vector<std::string> load_warnings_;
};

class HttpServer {
 public:
  explicit HttpServer(BenchService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  BenchService* service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace visbench::service
