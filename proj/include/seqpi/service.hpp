#pragma once

// Interactive sessions: a simulated labor advanced one hour per decision,
// with what-if risks at the current hour. Payloads are JSON documents using
// the dataset column names.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqpi/datagen.hpp"
#include "seqpi/estimators.hpp"

namespace seqpi {

struct ServiceOptions {
  ScmConfig coarse = ScmConfig::defaults(Mode::coarse);
  ScmConfig continuous = ScmConfig::defaults(Mode::continuous);
  UsualCarePolicy policy;
  // Fitted models per mode, used when a query asks for source=fitted.
  std::optional<TransitionModels> fitted_coarse;
  std::optional<TransitionModels> fitted_continuous;
  std::int64_t default_n_mc = 20000;
  std::int64_t max_n_mc = 1000000;
  unsigned threads = 0;
};

struct SessionEvent {
  int k = 0;  // hour at which the event is observed
  std::string type;  // decision | born | adverse_outcome
  std::optional<Action> action;
};

class RiskService {
 public:
  explicit RiskService(ServiceOptions options = {});

  // {"seed"?: u64, "mode"?: "coarse"|"continuous"} -> {session_id, seed, mode, state}
  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json state(const std::string& id) const;
  // Read-only. `method` is exact|mc|auto; `source` is oracle|fitted.
  nlohmann::json risks(const std::string& id, const std::vector<int>& estimand_ids,
                       std::optional<std::int64_t> n_mc, const std::string& method = "auto",
                       const std::string& source = "oracle") const;
  // {"action": "continue_vaginal"|"cesarean", "k"?: expected hour}
  nlohmann::json decide(const std::string& id, const nlohmann::json& request);
  void remove(const std::string& id);

  nlohmann::json snapshot(const std::string& id) const;
  // Returns the restored session id; the snapshot's id is kept.
  std::string restore(const nlohmann::json& snapshot);
  void save(const std::string& id, const std::filesystem::path& path) const;
  std::string load(const std::filesystem::path& path);

  std::size_t session_count() const;
  const ServiceOptions& options() const noexcept { return options_; }

 private:
  struct Session {
    std::string id;
    std::uint64_t seed = 0;
    ScmConfig cfg;
    History history;
    std::vector<SessionEvent> events;
    mutable std::shared_mutex mutex;  // single writer, many readers
    std::mutex decision_mutex;        // at most one decision in flight
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  nlohmann::json state_locked(const Session& s) const;
  std::string new_id();

  ServiceOptions options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_salt_;
  std::uint64_t id_counter_ = 0;
};

// Label and spec of a built-in estimand queried at hour k. Ids 1-4 at k > 0
// are anchored at k (same regime, same fixed horizon); `remapped` reports it.
struct QueryEstimand {
  EstimandSpec spec;
  std::string label;
  bool remapped = false;
};
QueryEstimand query_estimand(int id, int k, int final_hour);

// HTTP front end. Routes:
//   POST   /sessions
//   GET    /sessions/{id}/state
//   GET    /sessions/{id}/risks?estimands=5,6,7&n_mc=20000&method=auto&source=oracle
//   POST   /sessions/{id}/decision
//   DELETE /sessions/{id}
// Errors answer {"code", "message"}.
class HttpServer {
 public:
  explicit HttpServer(RiskService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace seqpi
