#include "dfgc/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dfgc/detector.hpp"
#include "dfgc/error.hpp"

namespace dfgc::store {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void io_fail(const std::string& what, const fs::path& p) {
  throw Error(ErrorKind::Io, what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const fs::path& p) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("write", p);
    }
    off += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

StateStore::StateStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  fs::create_directories(archive());
}

bool StateStore::has_config() const { return fs::exists(config_path()); }

game::GameConfig StateStore::read_config() const { return game::load_game_config(config_path()); }

void StateStore::write_config(const game::GameConfig& cfg) const {
  auto abs = cfg;
  if (!abs.dataset.empty()) abs.dataset = fs::absolute(abs.dataset);
  if (!abs.training.empty()) abs.training = fs::absolute(abs.training);
  const auto tmp = root_ / "config.json.tmp";
  {
    std::ofstream out(tmp);
    out << abs.to_json().dump(2) << '\n';
    if (!out) io_fail("cannot write", tmp);
  }
  fs::rename(tmp, config_path());
  fsync_dir(root_);
}

void StateStore::append_event(const ordered_json& event) const {
  const auto p = events_path();
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) io_fail("cannot open", p);
  try {
    write_all(fd, event.dump() + "\n", p);
    if (::fsync(fd) != 0) io_fail("fsync", p);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

std::vector<ordered_json> StateStore::read_events() const {
  std::vector<ordered_json> out;
  const auto p = events_path();
  if (!fs::exists(p)) return out;
  const std::string text = read_file(p);
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) {
      // Torn tail from a crash mid-append: never acknowledged, so drop it.
      fs::resize_file(p, start);
      break;
    }
    try {
      out.push_back(ordered_json::parse(text.substr(start, nl - start)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::State, "corrupt event log line " + std::to_string(out.size() + 1) + ": " + e.what());
    }
    start = nl + 1;
  }
  return out;
}

void StateStore::write_snapshot(const ordered_json& snapshot) const {
  const auto tmp = root_ / "snapshot.json.tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) io_fail("cannot open", tmp);
  try {
    write_all(fd, snapshot.dump(2) + "\n", tmp);
    if (::fsync(fd) != 0) io_fail("fsync", tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, snapshot_path());
  fsync_dir(root_);
}

ordered_json StateStore::read_snapshot() const {
  if (!fs::exists(snapshot_path())) return nullptr;
  try {
    return ordered_json::parse(read_file(snapshot_path()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::State, "corrupt snapshot " + snapshot_path().string() + ": " + e.what());
  }
}

fs::path store_root(const fs::path& fallback) {
  if (const char* env = std::getenv("DFGC_STORE"); env && *env) return env;
  return fallback;
}

Session::Session(fs::path root, const game::GameConfig* cfg, const identity::EmbeddingProvider& provider)
    : store_(std::move(root)), provider_(provider) {
  if (!store_.has_config()) {
    if (!cfg) throw Error(ErrorKind::NotFound, "store " + store_.root().string() + " has no game config");
    store_.write_config(*cfg);
  }
  game_ = std::make_unique<game::Game>(store_.read_config(), store_.archive(), provider_);
  const auto events = store_.read_events();
  for (const auto& e : events) game_->apply(e);
  info_.replayed_events = events.size();
  const auto snap = game_->snapshot();
  const auto on_disk = store_.read_snapshot();
  info_.snapshot_matched = !on_disk.is_null() && on_disk.dump() == snap.dump();
  if (!info_.snapshot_matched) store_.write_snapshot(snap);
  game_->set_event_sink([this](const ordered_json& e) { store_.append_event(e); });
  publish();
}

void Session::publish() {
  auto snap = std::make_shared<const ordered_json>(game_->snapshot());
  std::lock_guard lock(pub_mu_);
  published_ = std::move(snap);
}

std::shared_ptr<const ordered_json> Session::published() const {
  std::lock_guard lock(pub_mu_);
  return published_;
}

// Rejections are events too, so the snapshot is refreshed after failed
// commands as well.
struct Session::Commit {
  Session& s;
  std::uint64_t tick;
  explicit Commit(Session& session) : s(session), tick(session.game_->tick()) {}
  ~Commit() {
    if (s.game_->tick() == tick) return;
    try {
      s.store_.write_snapshot(s.game_->snapshot());
    } catch (...) {
      // The log is authoritative; the next open rewrites the snapshot.
    }
    s.publish();
  }
};

game::SubmissionRecord Session::submit_creation(const std::string& team, PhaseId phase, const fs::path& dir) {
  std::lock_guard lock(mu_);
  Commit commit(*this);
  return game_->submit_creation(team, phase, dir);
}

game::SubmissionRecord Session::submit_detection(const std::string& team, PhaseId phase,
                                                 const ordered_json& detector_spec) {
  std::lock_guard lock(mu_);
  Commit commit(*this);
  agents::DetectorHandle det;
  try {
    det = agents::make_detector(detector_spec, team);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parameter, std::string("malformed detector spec: ") + e.what());
  }
  return game_->submit_detection(team, phase, det);
}

ordered_json Session::advance_phase() {
  std::lock_guard lock(mu_);
  Commit commit(*this);
  game_->advance_phase();
  return game_->events().back();
}

ordered_json Session::advance_day() {
  std::lock_guard lock(mu_);
  Commit commit(*this);
  game_->advance_day();
  return game_->events().back();
}

game::FinalRankings Session::final_rankings() const {
  std::lock_guard lock(mu_);
  return game_->final_rankings();
}

}  // namespace dfgc::store
