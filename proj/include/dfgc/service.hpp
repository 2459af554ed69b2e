#pragma once

#include <condition_variable>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "json.hpp"

#include "dfgc/error.hpp"
#include "dfgc/store.hpp"

namespace httplib {
class Server;
}

namespace dfgc::service {

/// HTTP status for a domain error.
int http_status(ErrorKind kind) noexcept;

/// JSON HTTP front end of a Session.
///
///   POST /v1/submissions          {"team", "phase", "kind": "creation", "path": dir}
///                                 {"team", "phase", "kind": "detection", "detector": spec}
///                                 -> 202 {"job", "status": "queued"}
///   GET  /v1/submissions/{id}     job id: status queued/running/done, the record
///                                 when done, the error (with its HTTP status) when
///                                 failed; submission id: the stored record
///   GET  /v1/leaderboard/{phase}  entries ranked, frozen flag
///   POST /v1/admin/advance        next phase
///   POST /v1/admin/advance-day    next logical day
///   GET  /v1/state                full snapshot
///   GET  /v1/final                final rankings once the game is over
///
/// Submissions and admin commands run one at a time, in arrival order, on a
/// single command worker. Reads are served from the last published snapshot
/// and never wait for an evaluation.
class Service {
 public:
  explicit Service(store::Session& session);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Job {
    std::string id;
    nlohmann::ordered_json request;
    std::string status = "queued";
    nlohmann::ordered_json result;
    int http = 200;
    std::promise<void> finished;
    std::shared_future<void> done;
  };

  void routes();
  std::shared_ptr<Job> enqueue(nlohmann::ordered_json request);
  void worker();
  void run(Job& job);
  nlohmann::ordered_json job_view(const Job& job) const;

  store::Session& session_;
  std::unique_ptr<httplib::Server> server_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_job_ = 1;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace dfgc::service
