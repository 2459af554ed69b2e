#include "dfgc/game.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dfgc/digest.hpp"
#include "dfgc/error.hpp"
#include "dfgc/rocstats.hpp"

namespace dfgc::game {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

bool ranks_before(const LeaderboardEntry& a, const LeaderboardEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tick != b.tick) return a.tick < b.tick;
  return a.team < b.team;
}

ordered_json entry_json(const LeaderboardEntry& e) {
  return {{"team", e.team}, {"submission", e.submission_id}, {"score", e.score}, {"tick", e.tick}};
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

/// Drops directory prefixes from messages that end up in transcripts.
std::string strip_paths(std::string msg, std::initializer_list<fs::path> roots) {
  for (const auto& r : roots) {
    if (r.empty()) continue;
    const std::string prefix = r.string() + "/";
    for (auto pos = msg.find(prefix); pos != std::string::npos; pos = msg.find(prefix, pos)) {
      msg.erase(pos, prefix.size());
    }
  }
  return msg;
}

}  // namespace

ordered_json to_json(const SubmissionRecord& r) {
  return {{"id", r.id},       {"team", r.team},   {"phase", r.phase.label()},
          {"tick", r.tick},   {"day", r.day},     {"creation", r.creation},
          {"score", r.score}, {"payload_digest", r.payload_digest}, {"report", r.report}};
}

GameConfig::GameConfig() {
  for (int r = 2; r <= rounds; ++r) noise_term_phases.push_back({PhaseKind::Creation, r});
}

bool GameConfig::noise_term(PhaseId phase) const {
  return std::find(noise_term_phases.begin(), noise_term_phases.end(), phase) != noise_term_phases.end();
}

ordered_json GameConfig::to_json() const {
  ordered_json j;
  j["rounds"] = rounds;
  j["n_tasks"] = n_tasks;
  j["daily_cap"] = daily_cap;
  auto phases = ordered_json::array();
  for (const auto& p : noise_term_phases) phases.push_back(p.label());
  j["noise_term_phases"] = phases;
  j["anti_coeff"] = anti_coeff;
  j["sigma_ref"] = sigma_ref;
  j["seed_detectors"] = seed_detectors;
  j["seed"] = seed;
  j["dataset"] = dataset.string();
  j["training"] = training.string();
  return j;
}

GameConfig GameConfig::from_json(const nlohmann::json& j, const fs::path& base) {
  if (!j.is_object()) throw Error(ErrorKind::Parameter, "game config must be a JSON object");
  GameConfig c;
  c.rounds = j.value("rounds", c.rounds);
  if (c.rounds < 1) throw Error(ErrorKind::Parameter, "rounds must be >= 1");
  c.noise_term_phases.clear();
  if (j.contains("noise_term_phases")) {
    for (const auto& p : j["noise_term_phases"]) {
      const auto id = PhaseId::parse(p.get<std::string>());
      if (id.kind != PhaseKind::Creation) {
        throw Error(ErrorKind::Parameter, "noise_term_phases lists non-creation phase " + id.label());
      }
      c.noise_term_phases.push_back(id);
    }
  } else {
    for (int r = 2; r <= c.rounds; ++r) c.noise_term_phases.push_back({PhaseKind::Creation, r});
  }
  c.n_tasks = j.value("n_tasks", c.n_tasks);
  c.daily_cap = j.value("daily_cap", c.daily_cap);
  if (c.daily_cap < 1) throw Error(ErrorKind::Parameter, "daily_cap must be >= 1");
  c.anti_coeff = j.value("anti_coeff", c.anti_coeff);
  if (!(c.anti_coeff >= 0.0)) throw Error(ErrorKind::Parameter, "anti_coeff must be >= 0");
  c.sigma_ref = j.value("sigma_ref", c.sigma_ref);
  if (!(c.sigma_ref > 0.0)) throw Error(ErrorKind::Parameter, "sigma_ref must be > 0");
  if (j.contains("seed_detectors")) {
    for (const auto& d : j["seed_detectors"]) c.seed_detectors.push_back(d);
  }
  c.seed = j.value("seed", c.seed);
  c.dataset = resolve(j.value("dataset", std::string{}), base);
  c.training = resolve(j.value("training", std::string{}), base);
  return c;
}

GameConfig load_game_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open game config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parameter, "malformed game config " + path.string() + ": " + e.what());
  }
  return GameConfig::from_json(j, path.parent_path());
}

std::vector<PhaseId> schedule(int rounds) {
  std::vector<PhaseId> s;
  for (int r = 1; r <= rounds; ++r) {
    s.push_back({PhaseKind::Creation, r});
    s.push_back({PhaseKind::Detection, r});
  }
  return s;
}

std::vector<LeaderboardEntry> Leaderboard::ranked() const {
  std::vector<LeaderboardEntry> out;
  for (const auto& [team, e] : entries) out.push_back(e);
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

ordered_json FinalRankings::to_json() const {
  ordered_json j;
  auto det = ordered_json::array();
  for (const auto& e : detection) det.push_back(entry_json(e));
  j["detection"] = det;
  auto cre = ordered_json::array();
  for (std::size_t i = 0; i < creation.size(); ++i) {
    auto e = entry_json(creation[i]);
    e["breakdown"] = scoring::score_report(creation[i].team, PhaseId{}, creation_breakdowns[i]);
    e["breakdown"].erase("phase");
    cre.push_back(e);
  }
  j["creation"] = cre;
  return j;
}

Game::Game(GameConfig cfg, fs::path archive, const identity::EmbeddingProvider& provider)
    : cfg_(std::move(cfg)), archive_(std::move(archive)), provider_(provider) {
  if (cfg_.dataset.empty()) throw Error(ErrorKind::Parameter, "game config has no dataset");
  dataset_ = protocol::load_dataset(cfg_.dataset, provider_);
  if (cfg_.n_tasks > 0 && dataset_.tasks.size() != static_cast<std::size_t>(cfg_.n_tasks)) {
    throw Error(ErrorKind::Parameter, "dataset has " + std::to_string(dataset_.tasks.size()) +
                                          " tasks, config expects " + std::to_string(cfg_.n_tasks));
  }
  schedule_ = schedule(cfg_.rounds);
  for (const auto& p : schedule_) leaderboards_[p].phase = p;
  fs::create_directories(archive_);
  load_counterparty();
}

PhaseId Game::current_phase() const {
  if (final_) throw Error(ErrorKind::State, "the game is final");
  return schedule_[phase_index_];
}

const Leaderboard& Game::leaderboard(PhaseId phase) const {
  const auto it = leaderboards_.find(phase);
  if (it == leaderboards_.end()) throw Error(ErrorKind::NotFound, "no phase " + phase.label() + " in schedule");
  return it->second;
}

const SubmissionRecord& Game::submission(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error(ErrorKind::NotFound, "unknown submission '" + id + "'");
  return submissions_[it->second];
}

void Game::check_open(const std::string& team, PhaseId phase, bool creation) const {
  if (team.empty()) throw Error(ErrorKind::Parameter, "team label is empty");
  const auto pos = std::find(schedule_.begin(), schedule_.end(), phase);
  if (pos == schedule_.end()) throw Error(ErrorKind::Phase, "phase " + phase.label() + " is not scheduled");
  if ((phase.kind == PhaseKind::Creation) != creation) {
    throw Error(ErrorKind::Phase, std::string(creation ? "creation" : "detector") + " payload submitted to " +
                                      phase.label());
  }
  const auto idx = static_cast<std::size_t>(pos - schedule_.begin());
  if (final_ || idx < phase_index_) throw Error(ErrorKind::Frozen, "phase " + phase.label() + " is frozen");
  if (idx > phase_index_) {
    throw Error(ErrorKind::Phase, "phase " + phase.label() + " is not open; current phase is " +
                                      schedule_[phase_index_].label());
  }
  int used = 0;
  for (const auto& r : submissions_) used += (r.team == team && r.day == day_) ? 1 : 0;
  if (used >= cfg_.daily_cap) {
    throw Error(ErrorKind::Quota, "team '" + team + "' reached the daily cap of " +
                                      std::to_string(cfg_.daily_cap) + " submissions");
  }
  if (!creation && counterparty_.datasets.empty()) {
    throw Error(ErrorKind::NoCounterparty,
                "no creation submissions on the " + PhaseId{PhaseKind::Creation, phase.round}.label() +
                    " leaderboard to evaluate against");
  }
}

std::string Game::next_submission_id() const { return "sub-" + std::to_string(tick_ + 1); }

void Game::emit(ordered_json event) {
  if (sink_) sink_(event);
  apply(event);
}

scoring::CreationConfig Game::creation_config(PhaseId phase) const {
  scoring::CreationConfig c;
  c.noise_term_enabled = cfg_.noise_term(phase);
  c.anti_coeff = cfg_.anti_coeff;
  c.sigma_ref = cfg_.sigma_ref;
  return c;
}

std::vector<agents::DetectorHandle> Game::detectors_of(const Leaderboard& lb) const {
  std::vector<agents::DetectorHandle> out;
  for (const auto& e : lb.ranked()) {
    const auto path = archive_ / e.submission_id / "detector.json";
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "archived detector missing for " + e.submission_id);
    out.push_back(agents::make_detector(ordered_json::parse(in), e.team));
  }
  return out;
}

protocol::SubmissionManifest Game::archived_manifest(const SubmissionRecord& rec) const {
  auto m = protocol::validate_submission(archive_ / rec.id, dataset_.tasks, rec.team, rec.phase);
  if (m.checksum != rec.payload_digest) {
    throw Error(ErrorKind::Tamper, "archived submission " + rec.id + " changed: recorded " + rec.payload_digest +
                                       ", found " + m.checksum);
  }
  return m;
}

std::vector<scoring::FakeDataset> Game::datasets_of(const Leaderboard& lb) const {
  std::vector<scoring::FakeDataset> out;
  for (const auto& e : lb.ranked()) {
    const auto m = archived_manifest(submission(e.submission_id));
    out.push_back({e.team, protocol::load_submission(m, dataset_.tasks.entries)});
  }
  return out;
}

void Game::load_counterparty() {
  counterparty_ = {};
  if (final_) return;
  const PhaseId p = schedule_[phase_index_];
  if (p.kind == PhaseKind::Creation) {
    if (p.round == 1) {
      for (const auto& spec : cfg_.seed_detectors) counterparty_.detectors.push_back(agents::make_detector(spec));
    } else {
      counterparty_.detectors = detectors_of(leaderboards_.at({PhaseKind::Detection, p.round - 1}));
    }
  } else {
    counterparty_.datasets = datasets_of(leaderboards_.at({PhaseKind::Creation, p.round}));
  }
}

std::vector<agents::DetectorHandle> Game::counterparty_detectors() const { return counterparty_.detectors; }

const std::vector<scoring::FakeDataset>& Game::counterparty_datasets() const { return counterparty_.datasets; }

SubmissionRecord Game::submit_creation(const std::string& team, PhaseId phase, const fs::path& dir) {
  const auto id = next_submission_id();
  const auto dest = archive_ / id;
  try {
    check_open(team, phase, true);
    // Validate the incoming directory first so a bad payload never reaches the archive.
    protocol::validate_submission(dir, dataset_.tasks, team, phase);
    fs::remove_all(dest);
    fs::create_directories(dest);
    for (const auto& t : dataset_.tasks.entries) fs::copy_file(dir / t.filename(), dest / t.filename());
    const auto m = protocol::validate_submission(dest, dataset_.tasks, team, phase);
    const auto b = scoring::score_creation(m, dataset_.tasks, counterparty_.detectors, dataset_.real_set,
                                           provider_, creation_config(phase), &cache_);
    ordered_json ev;
    ev["tick"] = tick_ + 1;
    ev["phase"] = phase.label();
    ev["kind"] = "submission";
    ev["id"] = id;
    ev["team"] = team;
    ev["day"] = day_;
    ev["payload_digest"] = m.checksum;
    ev["score"] = b.total;
    ev["report"] = scoring::score_report(team, phase, b);
    emit(std::move(ev));
  } catch (const Error& e) {
    std::error_code ec;
    fs::remove_all(dest, ec);
    emit({{"tick", tick_ + 1},
          {"phase", phase.label()},
          {"kind", "rejection"},
          {"team", team},
          {"error", std::string(to_string(e.kind()))},
          {"message", strip_paths(e.what(), {archive_, dir.parent_path()})}});
    throw;
  }
  return submissions_.back();
}

SubmissionRecord Game::submit_detection(const std::string& team, PhaseId phase,
                                        const agents::DetectorHandle& detector) {
  const auto id = next_submission_id();
  const auto dest = archive_ / id;
  try {
    if (!detector) throw Error(ErrorKind::Parameter, "null detector");
    check_open(team, phase, false);
    const auto spec = detector->spec();
    // Score the rebuilt detector so live and replayed scores come from the same object.
    const auto rebuilt = agents::make_detector(spec, team);
    const auto s = scoring::score_detection(*rebuilt, dataset_.real_set, counterparty_.datasets, &cache_);
    fs::remove_all(dest);
    fs::create_directories(dest);
    {
      std::ofstream out(dest / "detector.json");
      out << spec.dump(2) << '\n';
      if (!out) throw Error(ErrorKind::Io, "cannot archive detector for " + id);
    }
    ordered_json ev;
    ev["tick"] = tick_ + 1;
    ev["phase"] = phase.label();
    ev["kind"] = "submission";
    ev["id"] = id;
    ev["team"] = team;
    ev["day"] = day_;
    ev["payload_digest"] = sha256_hex(spec.dump());
    ev["score"] = s.mean_auroc;
    ev["report"] = scoring::score_report(team, phase, s);
    emit(std::move(ev));
  } catch (const Error& e) {
    std::error_code ec;
    fs::remove_all(dest, ec);
    emit({{"tick", tick_ + 1},
          {"phase", phase.label()},
          {"kind", "rejection"},
          {"team", team},
          {"error", std::string(to_string(e.kind()))},
          {"message", strip_paths(e.what(), {archive_})}});
    throw;
  }
  return submissions_.back();
}

void Game::record_fault(const std::string& team, const std::string& message) {
  emit({{"tick", tick_ + 1},
        {"phase", final_ ? std::string("final") : current_phase().label()},
        {"kind", "fault"},
        {"team", team},
        {"message", strip_paths(message, {archive_})}});
}

void Game::advance_phase() {
  const auto p = current_phase();
  emit({{"tick", tick_ + 1}, {"phase", p.label()}, {"kind", "advance"}});
}

void Game::advance_day() {
  emit({{"tick", tick_ + 1}, {"phase", final_ ? std::string("final") : current_phase().label()},
        {"kind", "advance_day"}});
}

void Game::apply(const ordered_json& event) {
  const std::string kind = event.at("kind").get<std::string>();
  const auto tick = event.at("tick").get<std::uint64_t>();
  if (tick != tick_ + 1) {
    throw Error(ErrorKind::State, "event tick " + std::to_string(tick) + " does not follow " + std::to_string(tick_));
  }
  if (kind == "submission") {
    SubmissionRecord r;
    r.id = event.at("id").get<std::string>();
    r.team = event.at("team").get<std::string>();
    r.phase = PhaseId::parse(event.at("phase").get<std::string>());
    r.tick = tick;
    r.day = event.at("day").get<int>();
    r.creation = r.phase.kind == PhaseKind::Creation;
    r.score = event.at("score").get<double>();
    r.payload_digest = event.at("payload_digest").get<std::string>();
    r.report = event.at("report");
    if (final_ || schedule_[phase_index_] != r.phase) {
      throw Error(ErrorKind::State, "submission event for closed phase " + r.phase.label());
    }
    auto& lb = leaderboards_.at(r.phase);
    const auto it = lb.entries.find(r.team);
    if (it == lb.entries.end() || r.score > it->second.score) {
      lb.entries[r.team] = {r.team, r.id, r.score, r.tick};
    }
    by_id_[r.id] = submissions_.size();
    submissions_.push_back(std::move(r));
  } else if (kind == "advance") {
    if (final_) throw Error(ErrorKind::State, "cannot advance past the final phase");
    leaderboards_.at(schedule_[phase_index_]).frozen = true;
    if (phase_index_ + 1 == schedule_.size()) {
      final_ = true;
    } else {
      ++phase_index_;
    }
    ++day_;
    load_counterparty();
  } else if (kind == "advance_day") {
    ++day_;
  } else if (kind != "rejection" && kind != "fault") {
    throw Error(ErrorKind::State, "unknown event kind '" + kind + "'");
  }
  tick_ = tick;
  events_.push_back(event);
}

FinalRankings Game::final_rankings() const {
  if (!final_) throw Error(ErrorKind::State, "final rankings need a finished game");
  FinalRankings f;
  const PhaseId last_d{PhaseKind::Detection, cfg_.rounds};
  const PhaseId last_c{PhaseKind::Creation, cfg_.rounds};
  const auto& dlb = leaderboards_.at(last_d);
  f.detection = dlb.ranked();

  const auto entries = leaderboards_.at(last_c).ranked();
  if (entries.empty()) return f;
  std::vector<protocol::SubmissionManifest> manifests;
  for (const auto& e : entries) manifests.push_back(archived_manifest(submission(e.submission_id)));
  const auto detectors = detectors_of(dlb);
  const auto scores = scoring::rescore(manifests, dataset_.tasks, detectors, dataset_.real_set, provider_,
                                       creation_config(last_c), &cache_);
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<LeaderboardEntry> rescored = entries;
  for (std::size_t i = 0; i < entries.size(); ++i) rescored[i].score = scores[i].total;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ranks_before(rescored[a], rescored[b]); });
  for (auto i : order) {
    f.creation.push_back(rescored[i]);
    f.creation_breakdowns.push_back(scores[i]);
  }
  return f;
}

ordered_json Game::rescore_record(const SubmissionRecord& rec) const {
  // Counterparty of rec.phase as frozen when that phase was open.
  if (rec.creation) {
    std::vector<agents::DetectorHandle> detectors;
    if (rec.phase.round == 1) {
      for (const auto& spec : cfg_.seed_detectors) detectors.push_back(agents::make_detector(spec));
    } else {
      detectors = detectors_of(leaderboards_.at({PhaseKind::Detection, rec.phase.round - 1}));
    }
    const auto m = archived_manifest(rec);
    const auto b = scoring::score_creation(m, dataset_.tasks, detectors, dataset_.real_set, provider_,
                                           creation_config(rec.phase), nullptr);
    return scoring::score_report(rec.team, rec.phase, b);
  }
  const auto datasets = datasets_of(leaderboards_.at({PhaseKind::Creation, rec.phase.round}));
  std::ifstream in(archive_ / rec.id / "detector.json");
  if (!in) throw Error(ErrorKind::NotFound, "archived detector missing for " + rec.id);
  const auto det = agents::make_detector(ordered_json::parse(in), rec.team);
  const auto s = scoring::score_detection(*det, dataset_.real_set, datasets, nullptr);
  return scoring::score_report(rec.team, rec.phase, s);
}

std::vector<std::string> Game::audit() const {
  std::vector<std::string> bad;
  for (const auto& r : submissions_) {
    try {
      if (rescore_record(r).dump() != r.report.dump()) bad.push_back(r.id);
    } catch (const Error&) {
      bad.push_back(r.id);
    }
  }
  return bad;
}

ordered_json Game::snapshot() const {
  ordered_json j;
  j["config"] = cfg_.to_json();
  j["tick"] = tick_;
  j["day"] = day_;
  j["final"] = final_;
  j["current_phase"] = final_ ? std::string("final") : schedule_[phase_index_].label();
  auto lbs = ordered_json::object();
  for (const auto& p : schedule_) {
    const auto& lb = leaderboards_.at(p);
    auto entries = ordered_json::array();
    for (const auto& e : lb.ranked()) entries.push_back(entry_json(e));
    lbs[p.label()] = {{"frozen", lb.frozen}, {"entries", entries}};
  }
  j["leaderboards"] = lbs;
  auto subs = ordered_json::array();
  for (const auto& r : submissions_) subs.push_back(to_json(r));
  j["submissions"] = subs;
  return j;
}

std::string Game::transcript() const {
  std::string out;
  for (const auto& e : events_) {
    out += e.dump();
    out += '\n';
  }
  return out;
}

Scenario canned_scenario() {
  Scenario s;
  const std::vector<double> eps{0.0, 4.0 / 255.0, 8.0 / 255.0};
  s.creators.push_back(std::make_shared<agents::CopySwapCreator>("copy"));
  agents::FgsmCreator::Config fgsm;
  fgsm.eps_by_round = eps;
  s.creators.push_back(std::make_shared<agents::FgsmCreator>("fgsm", fgsm));
  auto blend = fgsm;
  blend.blend = true;
  s.creators.push_back(std::make_shared<agents::FgsmCreator>("fgsm-blend", blend));

  s.detectors.push_back(std::make_shared<agents::ConstantDetectorAgent>("constant", 0.5));
  s.detectors.push_back(std::make_shared<agents::LogisticDetectorAgent>("logistic", agents::LogisticDetectorAgent::Config{}));
  agents::LogisticDetectorAgent::Config aug;
  aug.train.iters = 1500;
  aug.augment_eps = {4.0 / 255.0, 8.0 / 255.0, 12.0 / 255.0};
  aug.augment_from_round = 3;
  s.detectors.push_back(std::make_shared<agents::LogisticDetectorAgent>("logistic-aug", aug));
  return s;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  for (const auto& c : j.value("creators", nlohmann::json::array())) s.creators.push_back(agents::make_creator(c));
  for (const auto& d : j.value("detectors", nlohmann::json::array())) {
    s.detectors.push_back(agents::make_detector_agent(d));
  }
  return s;
}

SimulationResult run_simulation(const Scenario& scenario, const GameConfig& cfg, const fs::path& work_dir,
                                const identity::EmbeddingProvider& provider) {
  if (scenario.creators.empty() || scenario.detectors.empty()) {
    throw Error(ErrorKind::Parameter, "scenario needs at least one creator and one detector agent");
  }
  if (cfg.training.empty()) throw Error(ErrorKind::Parameter, "simulation needs a training dataset");
  const auto training = agents::load_training_set(cfg.training);
  fs::remove_all(work_dir / "archive");
  fs::remove_all(work_dir / "out");
  Game game(cfg, work_dir / "archive", provider);
  const auto raw_swaps = cfg.dataset / "baseline";

  while (!game.is_final()) {
    const PhaseId phase = game.current_phase();
    if (phase.kind == PhaseKind::Creation) {
      for (const auto& c : scenario.creators) {
        const auto out = work_dir / "out" / phase.label() / c->id();
        try {
          c->create({phase, &game.dataset().tasks, raw_swaps, &training, cfg.seed}, out);
        } catch (const std::exception& e) {
          game.record_fault(c->id(), strip_paths(e.what(), {work_dir, cfg.dataset, cfg.training}));
          continue;
        }
        try {
          game.submit_creation(c->id(), phase, out);
        } catch (const Error&) {
          // Recorded as a rejection event.
        }
      }
    } else {
      for (const auto& d : scenario.detectors) {
        agents::DetectorHandle h;
        try {
          h = d->build({phase, &training, cfg.seed});
        } catch (const std::exception& e) {
          game.record_fault(d->id(), strip_paths(e.what(), {work_dir, cfg.dataset, cfg.training}));
          continue;
        }
        try {
          game.submit_detection(d->id(), phase, h);
        } catch (const Error&) {
        }
      }
    }
    game.advance_phase();
  }

  SimulationResult res;
  for (const auto& p : schedule(cfg.rounds)) res.leaderboards[p] = game.leaderboard(p).ranked();
  res.submissions = game.submissions();
  res.final = game.final_rankings();
  res.transcript = game.transcript();
  res.transcript += ordered_json{{"tick", game.tick() + 1}, {"phase", "final"}, {"kind", "final_rankings"},
                                 {"rankings", res.final.to_json()}}
                        .dump();
  res.transcript += '\n';
  res.transcript_digest = sha256_hex(res.transcript);
  return res;
}

ordered_json CrossEval::to_json() const {
  ordered_json j;
  j["detectors"] = detectors;
  j["datasets"] = datasets;
  j["auroc"] = auroc;
  auto corr = ordered_json::array();
  for (const auto& c : correlations) {
    ordered_json e{{"a", c.a}, {"b", c.b}};
    if (c.r) {
      e["r"] = *c.r;
    } else {
      e["r"] = nullptr;
      e["undefined"] = true;
    }
    corr.push_back(e);
  }
  j["correlations"] = corr;
  return j;
}

CrossEval cross_eval(std::span<const agents::DetectorHandle> detectors,
                     std::span<const scoring::FakeDataset> datasets, const protocol::ImageSet& real_set) {
  if (detectors.empty()) throw Error(ErrorKind::Parameter, "cross_eval needs at least one detector");
  if (datasets.empty()) throw Error(ErrorKind::Parameter, "cross_eval needs at least one dataset");
  if (real_set.empty()) throw Error(ErrorKind::Parameter, "cross_eval: empty real set");
  CrossEval out;
  for (const auto& d : datasets) {
    if (d.images.empty()) throw Error(ErrorKind::Parameter, "cross_eval: dataset '" + d.id + "' is empty");
    out.datasets.push_back(d.id);
  }
  for (const auto& det : detectors) {
    out.detectors.push_back(det->id());
    const auto reals = det->score_set(real_set);
    std::vector<double> row;
    for (const auto& d : datasets) row.push_back(stats::auroc(reals, det->score_set(d.images)).auroc);
    out.auroc.push_back(std::move(row));
  }
  for (std::size_t a = 0; a < datasets.size(); ++a) {
    for (std::size_t b = a + 1; b < datasets.size(); ++b) {
      CrossEval::Correlation c{datasets[a].id, datasets[b].id, std::nullopt};
      if (detectors.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& row : out.auroc) {
          x.push_back(row[a]);
          y.push_back(row[b]);
        }
        c.r = stats::pearson(x, y);
      }
      out.correlations.push_back(c);
    }
  }
  return out;
}

}  // namespace dfgc::game
