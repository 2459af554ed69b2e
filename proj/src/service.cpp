#include "dfgc/service.hpp"

#include "httplib.h"

#include "dfgc/phase.hpp"

namespace dfgc::service {

using nlohmann::ordered_json;

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parameter:
      return 400;
    case ErrorKind::Phase:
    case ErrorKind::Quota:
    case ErrorKind::NoCounterparty:
      return 403;
    case ErrorKind::NotFound:
      return 404;
    case ErrorKind::Frozen:
    case ErrorKind::State:
      return 409;
    case ErrorKind::Io:
      return 500;
    default:
      return 422;
  }
}

namespace {

ordered_json error_body(ErrorKind kind, const std::string& message) {
  return {{"error", {{"kind", std::string(to_string(kind))}, {"message", message}}}};
}

void reply(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void reply_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  reply(res, http_status(kind), error_body(kind, message));
}

std::string required_string(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
    throw Error(ErrorKind::Parameter, std::string("missing string field '") + key + "'");
  }
  return j[key].get<std::string>();
}

}  // namespace

Service::Service(store::Session& session) : session_(session), server_(std::make_unique<httplib::Server>()) {
  routes();
  worker_ = std::thread([this] { worker(); });
}

Service::~Service() {
  stop();
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() { server_->stop(); }

std::shared_ptr<Service::Job> Service::enqueue(ordered_json request) {
  auto job = std::make_shared<Job>();
  job->request = std::move(request);
  job->done = job->finished.get_future().share();
  {
    std::lock_guard lock(mu_);
    job->id = "job-" + std::to_string(next_job_++);
    jobs_[job->id] = job;
    queue_.push_back(job);
  }
  cv_.notify_one();
  return job;
}

void Service::worker() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = queue_.front();
      queue_.pop_front();
      job->status = "running";
    }
    run(*job);
    job->finished.set_value();
  }
}

void Service::run(Job& job) {
  ordered_json result;
  int http = 200;
  bool ok = true;
  try {
    const auto& rq = job.request;
    const std::string command = rq.at("command").get<std::string>();
    if (command == "submit") {
      const auto team = required_string(rq, "team");
      const auto phase = PhaseId::parse(required_string(rq, "phase"));
      const auto kind = required_string(rq, "kind");
      game::SubmissionRecord rec;
      if (kind == "creation") {
        rec = session_.submit_creation(team, phase, required_string(rq, "path"));
      } else if (kind == "detection") {
        if (!rq.contains("detector") || !rq["detector"].is_object()) {
          throw Error(ErrorKind::Parameter, "missing object field 'detector'");
        }
        rec = session_.submit_detection(team, phase, rq["detector"]);
      } else {
        throw Error(ErrorKind::Parameter, "kind must be 'creation' or 'detection'");
      }
      result = game::to_json(rec);
    } else if (command == "advance") {
      result = session_.advance_phase();
    } else if (command == "advance-day") {
      result = session_.advance_day();
    }
  } catch (const Error& e) {
    ok = false;
    http = http_status(e.kind());
    result = error_body(e.kind(), e.what());
  } catch (const std::exception& e) {
    ok = false;
    http = 500;
    result = error_body(ErrorKind::Io, e.what());
  }
  std::lock_guard lock(mu_);
  job.status = ok ? "done" : "failed";
  job.http = http;
  job.result = std::move(result);
}

ordered_json Service::job_view(const Job& job) const {
  ordered_json j{{"job", job.id}, {"status", job.status}};
  if (job.status == "done") {
    for (auto it = job.result.begin(); it != job.result.end(); ++it) j[it.key()] = it.value();
  } else if (job.status == "failed") {
    j["error"] = job.result["error"];
  }
  return j;
}

void Service::routes() {
  auto& s = *server_;

  s.Post("/v1/submissions", [this](const httplib::Request& req, httplib::Response& res) {
    ordered_json body;
    try {
      body = ordered_json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      return reply_error(res, ErrorKind::Parameter, std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_object()) return reply_error(res, ErrorKind::Parameter, "request body must be an object");
    try {
      required_string(body, "team");
      PhaseId::parse(required_string(body, "phase"));
      required_string(body, "kind");
    } catch (const Error& e) {
      return reply_error(res, e.kind(), e.what());
    }
    body["command"] = "submit";
    const auto job = enqueue(std::move(body));
    reply(res, 202, {{"job", job->id}, {"status", "queued"}});
  });

  s.Get(R"(/v1/submissions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    {
      std::lock_guard lock(mu_);
      if (const auto it = jobs_.find(id); it != jobs_.end()) {
        const auto& job = *it->second;
        return reply(res, job.status == "failed" ? job.http : 200, job_view(job));
      }
    }
    const auto snap = session_.published();
    for (const auto& rec : (*snap)["submissions"]) {
      if (rec["id"] == id) {
        ordered_json j{{"status", "done"}};
        for (auto it = rec.begin(); it != rec.end(); ++it) j[it.key()] = it.value();
        return reply(res, 200, j);
      }
    }
    reply_error(res, ErrorKind::NotFound, "unknown submission or job '" + id + "'");
  });

  s.Get(R"(/v1/leaderboard/([A-Za-z0-9]+))", [this](const httplib::Request& req, httplib::Response& res) {
    PhaseId phase;
    try {
      phase = PhaseId::parse(req.matches[1]);
    } catch (const Error& e) {
      return reply_error(res, e.kind(), e.what());
    }
    const auto snap = session_.published();
    const auto& lbs = (*snap)["leaderboards"];
    if (!lbs.contains(phase.label())) {
      return reply_error(res, ErrorKind::NotFound, "phase " + phase.label() + " is not scheduled");
    }
    const auto& lb = lbs[phase.label()];
    reply(res, 200, {{"phase", phase.label()}, {"frozen", lb["frozen"]}, {"entries", lb["entries"]}});
  });

  auto admin = [this](const char* command) {
    return [this, command](const httplib::Request&, httplib::Response& res) {
      const auto job = enqueue({{"command", command}});
      job->done.wait();
      std::lock_guard lock(mu_);
      reply(res, job->status == "done" ? 200 : job->http, job->result);
    };
  };
  s.Post("/v1/admin/advance", admin("advance"));
  s.Post("/v1/admin/advance-day", admin("advance-day"));

  s.Get("/v1/state", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, *session_.published());
  });

  s.Get("/v1/final", [this](const httplib::Request&, httplib::Response& res) {
    try {
      reply(res, 200, session_.final_rankings().to_json());
    } catch (const Error& e) {
      reply_error(res, e.kind(), e.what());
    }
  });
}

}  // namespace dfgc::service
