#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfgc/game.hpp"

namespace dfgc::store {

/// On-disk layout of a game store:
///   config.json     game configuration (dataset paths made absolute)
///   events.jsonl    append-only event log, fsynced per event
///   snapshot.json   state after the last applied event, replaced atomically
///   submissions/    archived payloads, one directory per submission id
class StateStore {
 public:
  explicit StateStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path archive() const { return root_ / "submissions"; }
  std::filesystem::path events_path() const { return root_ / "events.jsonl"; }
  std::filesystem::path snapshot_path() const { return root_ / "snapshot.json"; }
  std::filesystem::path config_path() const { return root_ / "config.json"; }

  bool has_config() const;
  game::GameConfig read_config() const;
  void write_config(const game::GameConfig& cfg) const;

  /// Appends one line and fsyncs before returning.
  void append_event(const nlohmann::ordered_json& event) const;
  /// Complete lines of the log. A torn final line (no newline) is dropped
  /// and truncated away so later appends start on a line boundary.
  std::vector<nlohmann::ordered_json> read_events() const;

  /// Write to a temporary file, fsync, rename over the old snapshot.
  void write_snapshot(const nlohmann::ordered_json& snapshot) const;
  /// Null when no snapshot exists.
  nlohmann::ordered_json read_snapshot() const;

 private:
  std::filesystem::path root_;
};

/// Default store root: $DFGC_STORE if set, else `fallback`.
std::filesystem::path store_root(const std::filesystem::path& fallback);

/// A game bound to a store. Every command's event reaches the log before it
/// is applied, and the snapshot is rewritten after each command, so a crash
/// at any point loses at most the command in flight.
///
/// Commands are serialised by an internal mutex; published() gives readers a
/// consistent snapshot without waiting on a running evaluation.
class Session {
 public:
  struct OpenInfo {
    std::size_t replayed_events = 0;
    /// False when no snapshot existed or it lagged behind the log.
    bool snapshot_matched = false;
  };

  /// Opens the store, writing `cfg` as its configuration when the store is new
  /// (a store that already has one keeps it), and replays the event log.
  Session(std::filesystem::path root, const game::GameConfig* cfg,
          const identity::EmbeddingProvider& provider);

  const OpenInfo& open_info() const noexcept { return info_; }
  const StateStore& store() const noexcept { return store_; }

  game::SubmissionRecord submit_creation(const std::string& team, PhaseId phase,
                                         const std::filesystem::path& dir);
  game::SubmissionRecord submit_detection(const std::string& team, PhaseId phase,
                                          const nlohmann::ordered_json& detector_spec);
  nlohmann::ordered_json advance_phase();
  nlohmann::ordered_json advance_day();
  game::FinalRankings final_rankings() const;

  /// Latest snapshot; cheap to copy and safe to read from any thread.
  std::shared_ptr<const nlohmann::ordered_json> published() const;

  /// Runs `fn` with exclusive access to the game.
  template <class Fn>
  auto with_game(Fn&& fn) const {
    std::lock_guard lock(mu_);
    return fn(static_cast<const game::Game&>(*game_));
  }

 private:
  struct Commit;
  void publish();

  StateStore store_;
  const identity::EmbeddingProvider& provider_;
  std::unique_ptr<game::Game> game_;
  OpenInfo info_;
  mutable std::mutex mu_;
  mutable std::mutex pub_mu_;
  std::shared_ptr<const nlohmann::ordered_json> published_;
};

}  // namespace dfgc::store
