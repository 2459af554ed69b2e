#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "dfgc/detector.hpp"
#include "dfgc/error.hpp"

namespace dfgc::agents {

namespace {

constexpr std::string_view kHandshake = "DFGC-DETECTOR 1";

}  // namespace

struct ExternalDetector::Process {
  pid_t pid = -1;
  int fd = -1;
  std::string buffer;
};

ExternalDetector::ExternalDetector(std::string id, Config cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {
  if (cfg_.command.empty()) throw Error(ErrorKind::Parameter, "external detector: empty command");
  if (cfg_.batch_size == 0) cfg_.batch_size = 1;
}

ExternalDetector::~ExternalDetector() { shutdown(); }

void ExternalDetector::shutdown() const noexcept {
  if (!proc_) return;
  if (proc_->fd >= 0) ::close(proc_->fd);
  if (proc_->pid > 0) {
    int status = 0;
    // Give the child a moment to exit on EOF before killing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(proc_->pid, &status, WNOHANG) != 0) {
        proc_.reset();
        return;
      }
      ::usleep(2000);
    }
    ::kill(proc_->pid, SIGKILL);
    ::waitpid(proc_->pid, &status, 0);
  }
  proc_.reset();
}

void ExternalDetector::ensure_started() const {
  if (proc_) return;
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': socketpair failed");
  }
  std::vector<char*> argv;
  for (const auto& a : cfg_.command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': fork failed");
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(sv[1]);
  proc_ = std::make_unique<Process>();
  proc_->pid = pid;
  proc_->fd = sv[0];
  const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
  std::string hello;
  try {
    hello = read_line(deadline, "the handshake");
  } catch (...) {
    shutdown();
    throw;
  }
  if (hello != kHandshake) {
    shutdown();
    throw Error(ErrorKind::DetectorFault,
                "external detector '" + id_ + "': bad handshake line '" + hello + "'");
  }
}

std::string ExternalDetector::read_line(std::chrono::steady_clock::time_point deadline,
                                        const std::string& waiting_for) const {
  while (true) {
    const auto nl = proc_->buffer.find('\n');
    if (nl != std::string::npos) {
      std::string line = proc_->buffer.substr(0, nl);
      proc_->buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': timed out waiting for " + waiting_for);
    }
    pollfd pfd{proc_->fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': timed out waiting for " + waiting_for);
    char chunk[4096];
    const ssize_t got = ::read(proc_->fd, chunk, sizeof chunk);
    if (got <= 0) {
      throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': process closed its output while waiting for " + waiting_for);
    }
    proc_->buffer.append(chunk, static_cast<std::size_t>(got));
  }
}

std::vector<double> ExternalDetector::score_paths(const std::vector<std::string>& paths) const {
  std::lock_guard lock(mu_);
  std::vector<double> out;
  out.reserve(paths.size());
  try {
    ensure_started();
    for (std::size_t start = 0; start < paths.size(); start += cfg_.batch_size) {
      const std::size_t end = std::min(paths.size(), start + cfg_.batch_size);
      std::string request;
      for (std::size_t i = start; i < end; ++i) request += "SCORE\t" + paths[i] + "\n";
      std::size_t sent = 0;
      while (sent < request.size()) {
        const ssize_t n = ::send(proc_->fd, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
          throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': write failed");
        }
        sent += static_cast<std::size_t>(n);
      }
      const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
      for (std::size_t i = start; i < end; ++i) {
        const std::string line = read_line(deadline, "score of " + paths[i]);
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
          throw Error(ErrorKind::DetectorFault,
                      "external detector '" + id_ + "': malformed line '" + line + "'");
        }
        const std::string path = line.substr(0, tab);
        if (path != paths[i]) {
          throw Error(ErrorKind::DetectorFault, "external detector '" + id_ + "': missing score for " +
                                                    paths[i] + " (got line '" + line + "')");
        }
        const std::string value = line.substr(tab + 1);
        double score = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), score);
        if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(score)) {
          throw Error(ErrorKind::DetectorFault,
                      "external detector '" + id_ + "': bad score in line '" + line + "'");
        }
        out.push_back(score);
      }
    }
  } catch (const Error&) {
    // A faulted child may be out of sync with the protocol; restart next time.
    shutdown();
    throw;
  }
  return out;
}

double ExternalDetector::score(const Image& img) const {
  static std::atomic<int> counter{0};
  const auto path = std::filesystem::temp_directory_path() /
                    ("dfgc_ext_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".png");
  write_png(path, img);
  try {
    const double s = score_paths({path.string()}).front();
    std::filesystem::remove(path);
    return s;
  } catch (...) {
    std::filesystem::remove(path);
    throw;
  }
}

std::vector<double> ExternalDetector::score_set(const protocol::ImageSet& images) const {
  std::vector<std::string> paths;
  std::vector<std::filesystem::path> temps;
  static std::atomic<int> counter{0};
  for (const auto& item : images) {
    if (!item.path.empty()) {
      paths.push_back(std::filesystem::absolute(item.path).string());
    } else {
      const auto p = std::filesystem::temp_directory_path() /
                     ("dfgc_ext_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".png");
      write_png(p, item.image);
      temps.push_back(p);
      paths.push_back(p.string());
    }
  }
  auto cleanup = [&] {
    for (const auto& t : temps) std::filesystem::remove(t);
  };
  try {
    auto out = score_paths(paths);
    cleanup();
    return out;
  } catch (...) {
    cleanup();
    throw;
  }
}

nlohmann::ordered_json ExternalDetector::spec() const {
  return {{"kind", "external"},
          {"id", id_},
          {"command", cfg_.command},
          {"timeout_ms", cfg_.timeout.count()},
          {"batch_size", cfg_.batch_size}};
}

DetectorHandle external_detector(const std::string& id, const ExternalDetector::Config& cfg) {
  return std::make_shared<ExternalDetector>(id, cfg);
}

}  // namespace dfgc::agents
