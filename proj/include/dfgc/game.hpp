#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfgc/agents.hpp"
#include "dfgc/identity.hpp"
#include "dfgc/phase.hpp"
#include "dfgc/protocol.hpp"
#include "dfgc/scoring.hpp"

namespace dfgc::game {

/// Game configuration, read from a JSON file with the keys
///   rounds             number of C/D rounds (default 3 -> C1 D1 C2 D2 C3 D3)
///   n_tasks            expected task count, 0 to accept the dataset's
///   daily_cap          accepted submissions per team per day (default 10)
///   noise_term_phases  creation phases scoring the noise term (default C2..Cn)
///   anti_coeff         anti-detection weight (default 2)
///   sigma_ref          noise score reference level (default 25/255)
///   seed_detectors     detector specs scoring C1 (default none)
///   seed               root seed for agents
///   dataset            evaluation dataset root
///   training           training dataset root for simulated agents (optional)
/// Relative paths resolve against the config file's directory.
struct GameConfig {
  int rounds = 3;
  int n_tasks = 0;
  int daily_cap = 10;
  std::vector<PhaseId> noise_term_phases;
  double anti_coeff = 2.0;
  double sigma_ref = metrics::kDefaultSigmaRef;
  std::vector<nlohmann::ordered_json> seed_detectors;
  std::uint64_t seed = 1;
  std::filesystem::path dataset;
  std::filesystem::path training;

  GameConfig();
  bool noise_term(PhaseId phase) const;
  nlohmann::ordered_json to_json() const;
  static GameConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
};

GameConfig load_game_config(const std::filesystem::path& path);

/// C1, D1, C2, D2, ...
std::vector<PhaseId> schedule(int rounds);

struct LeaderboardEntry {
  std::string team;
  std::string submission_id;
  double score = 0.0;
  std::uint64_t tick = 0;
};

struct Leaderboard {
  PhaseId phase;
  std::map<std::string, LeaderboardEntry> entries;  // by team
  bool frozen = false;

  /// Descending score; ties go to the earlier submission, then the team label.
  std::vector<LeaderboardEntry> ranked() const;
};

struct SubmissionRecord {
  std::string id;
  std::string team;
  PhaseId phase;
  std::uint64_t tick = 0;
  int day = 0;
  bool creation = true;
  double score = 0.0;
  std::string payload_digest;
  nlohmann::ordered_json report;
};

nlohmann::ordered_json to_json(const SubmissionRecord& r);

struct FinalRankings {
  std::vector<LeaderboardEntry> detection;
  /// Final C-phase entries rescored against the final D-phase detectors.
  std::vector<LeaderboardEntry> creation;
  std::vector<scoring::CreationScoreBreakdown> creation_breakdowns;  // same order as `creation`
  nlohmann::ordered_json to_json() const;
};

/// Phase state machine, leaderboards and submission archive.
///
/// Every state change is an event (JSON object). Mutating calls build the
/// event, hand it to the event sink (if any) and then apply it, so a game
/// can be rebuilt by applying a recorded event sequence to a fresh instance.
/// Creation payloads are archived under <archive>/<submission id>/, detector
/// specs as <archive>/<submission id>/detector.json.
///
/// Not internally synchronised: callers serialise access.
class Game {
 public:
  using EventSink = std::function<void(const nlohmann::ordered_json&)>;

  Game(GameConfig cfg, std::filesystem::path archive, const identity::EmbeddingProvider& provider);

  const GameConfig& config() const noexcept { return cfg_; }
  const protocol::Dataset& dataset() const noexcept { return dataset_; }
  const std::filesystem::path& archive() const noexcept { return archive_; }

  bool is_final() const noexcept { return final_; }
  /// Throws ErrorKind::State once the game is final.
  PhaseId current_phase() const;
  std::uint64_t tick() const noexcept { return tick_; }
  int day() const noexcept { return day_; }

  const Leaderboard& leaderboard(PhaseId phase) const;
  const std::vector<SubmissionRecord>& submissions() const noexcept { return submissions_; }
  const SubmissionRecord& submission(const std::string& id) const;
  const std::vector<nlohmann::ordered_json>& events() const noexcept { return events_; }

  void set_event_sink(EventSink sink) { sink_ = std::move(sink); }

  /// Validates, archives and scores a creation submission against the frozen
  /// counterparty detectors, then updates the leaderboard.
  SubmissionRecord submit_creation(const std::string& team, PhaseId phase,
                                   const std::filesystem::path& dir);
  /// Scores a detector against the frozen previous creation leaderboard.
  SubmissionRecord submit_detection(const std::string& team, PhaseId phase,
                                    const agents::DetectorHandle& detector);

  /// Records an agent fault in the transcript without touching leaderboards.
  void record_fault(const std::string& team, const std::string& message);

  void advance_phase();
  void advance_day();

  FinalRankings final_rankings() const;

  /// Detectors scoring the current creation phase.
  std::vector<agents::DetectorHandle> counterparty_detectors() const;
  /// Datasets scoring the current detection phase, named by team.
  const std::vector<scoring::FakeDataset>& counterparty_datasets() const;

  /// Applies a recorded event.
  void apply(const nlohmann::ordered_json& event);

  /// Complete observable state (leaderboards, records, clock).
  nlohmann::ordered_json snapshot() const;

  /// Recomputes every accepted submission's report from the archive and the
  /// frozen counterparty of its phase; returns ids whose reports differ.
  std::vector<std::string> audit() const;

  /// Events as JSON lines.
  std::string transcript() const;

 private:
  struct Counterparty {
    std::vector<agents::DetectorHandle> detectors;
    std::vector<scoring::FakeDataset> datasets;
  };

  void check_open(const std::string& team, PhaseId phase, bool creation) const;
  std::string next_submission_id() const;
  void emit(nlohmann::ordered_json event);
  void load_counterparty();
  scoring::CreationConfig creation_config(PhaseId phase) const;
  std::vector<agents::DetectorHandle> detectors_of(const Leaderboard& lb) const;
  std::vector<scoring::FakeDataset> datasets_of(const Leaderboard& lb) const;
  protocol::SubmissionManifest archived_manifest(const SubmissionRecord& rec) const;
  nlohmann::ordered_json rescore_record(const SubmissionRecord& rec) const;

  GameConfig cfg_;
  std::filesystem::path archive_;
  const identity::EmbeddingProvider& provider_;
  protocol::Dataset dataset_;
  std::vector<PhaseId> schedule_;
  std::size_t phase_index_ = 0;
  bool final_ = false;
  std::uint64_t tick_ = 0;
  int day_ = 0;
  std::map<PhaseId, Leaderboard> leaderboards_;
  std::vector<SubmissionRecord> submissions_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<nlohmann::ordered_json> events_;
  Counterparty counterparty_;
  EventSink sink_;
  mutable scoring::ScoreCache cache_;
};

/// Scripted participants for run_simulation.
struct Scenario {
  std::vector<agents::CreatorHandle> creators;
  std::vector<agents::DetectorAgentHandle> detectors;
};

/// The canned scenario: creators copy / fgsm / fgsm-blend, detectors
/// constant / plain logistic / adversarially augmented logistic.
Scenario canned_scenario();
Scenario scenario_from_json(const nlohmann::json& j);

struct SimulationResult {
  std::string transcript;
  std::string transcript_digest;
  std::map<PhaseId, std::vector<LeaderboardEntry>> leaderboards;
  /// Every accepted submission, in order.
  std::vector<SubmissionRecord> submissions;
  FinalRankings final;
};

/// Plays the full schedule: every creator submits once per C-phase, every
/// detector agent once per D-phase, then the phase advances. Agent failures
/// become fault events. Requires cfg.training.
SimulationResult run_simulation(const Scenario& scenario, const GameConfig& cfg,
                                const std::filesystem::path& work_dir,
                                const identity::EmbeddingProvider& provider);

struct CrossEval {
  std::vector<std::string> detectors;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> auroc;  // [detector][dataset]
  struct Correlation {
    std::string a, b;
    std::optional<double> r;  // nullopt: undefined (fewer than 2 detectors or constant column)
  };
  std::vector<Correlation> correlations;
  nlohmann::ordered_json to_json() const;
};

/// AUROC of every detector on every dataset, plus Pearson correlations of
/// dataset columns across detectors.
CrossEval cross_eval(std::span<const agents::DetectorHandle> detectors,
                     std::span<const scoring::FakeDataset> datasets, const protocol::ImageSet& real_set);

}  // namespace dfgc::game
