#include "dfgc/scoring.hpp"

#include <cstdio>

#include "dfgc/digest.hpp"
#include "dfgc/error.hpp"

namespace dfgc::scoring {

namespace {

std::string real_set_fingerprint(const protocol::ImageSet& set) {
  Sha256 h;
  for (const auto& item : set) {
    h.update(item.name);
    h.update(std::string_view("\n"));
    const auto data = item.image.data();
    h.update(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size_bytes()));
  }
  return h.hex();
}

std::string real_cache_key(const agents::Detector& detector, const std::string& fingerprint) {
  return sha256_hex(detector.spec().dump()) + ":" + fingerprint;
}

std::vector<double> real_scores(const agents::Detector& detector, const protocol::ImageSet& real_set,
                                const std::string& fingerprint, ScoreCache* cache) {
  std::vector<double> scores;
  if (!cache) return detector.score_set(real_set);
  const auto key = real_cache_key(detector, fingerprint);
  if (cache->lookup_real_scores(key, scores)) return scores;
  scores = detector.score_set(real_set);
  cache->store_real_scores(key, scores);
  return scores;
}

std::string terms_key(const protocol::SubmissionManifest& manifest, const CreationConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", cfg.sigma_ref);
  return manifest.checksum + ":" + buf;
}

}  // namespace

bool ScoreCache::lookup_terms(const std::string& key, CreationTerms& out) const {
  std::shared_lock lock(mu_);
  const auto it = terms_.find(key);
  if (it == terms_.end()) return false;
  out = it->second;
  return true;
}

void ScoreCache::store_terms(const std::string& key, const CreationTerms& terms) {
  std::unique_lock lock(mu_);
  terms_.insert_or_assign(key, terms);
}

bool ScoreCache::lookup_real_scores(const std::string& key, std::vector<double>& out) const {
  std::shared_lock lock(mu_);
  const auto it = real_scores_.find(key);
  if (it == real_scores_.end()) return false;
  out = it->second;
  return true;
}

void ScoreCache::store_real_scores(const std::string& key, std::vector<double> scores) {
  std::unique_lock lock(mu_);
  real_scores_.insert_or_assign(key, std::move(scores));
}

std::size_t ScoreCache::term_entries() const {
  std::shared_lock lock(mu_);
  return terms_.size();
}

DetectionScore score_detection(const agents::Detector& detector, const protocol::ImageSet& real_set,
                               std::span<const FakeDataset> fake_sets, ScoreCache* cache) {
  if (real_set.empty()) throw Error(ErrorKind::Parameter, "score_detection: empty real set");
  if (fake_sets.empty()) throw Error(ErrorKind::Parameter, "score_detection: no fake datasets");
  DetectionScore out;
  for (const auto& fs : fake_sets) {
    if (fs.images.empty()) {
      throw Error(ErrorKind::Parameter, "score_detection: fake dataset '" + fs.id + "' is empty");
    }
    if (out.per_dataset.contains(fs.id)) {
      throw Error(ErrorKind::Parameter, "score_detection: duplicate dataset id '" + fs.id + "'");
    }
    out.per_dataset.emplace(fs.id, stats::AurocResult{});
  }
  const auto reals = real_scores(detector, real_set, real_set_fingerprint(real_set), cache);
  for (const auto& fs : fake_sets) {
    const auto fakes = detector.score_set(fs.images);
    out.per_dataset[fs.id] = stats::auroc(reals, fakes);
  }
  double sum = 0.0;
  for (const auto& [id, r] : out.per_dataset) sum += r.auroc;
  out.n_datasets = out.per_dataset.size();
  out.mean_auroc = sum / static_cast<double>(out.n_datasets);
  return out;
}

CreationTerms creation_terms(const protocol::SubmissionManifest& manifest,
                             const protocol::SwapTaskList& tasks,
                             const identity::EmbeddingProvider& provider, const CreationConfig& cfg,
                             ScoreCache* cache) {
  if (tasks.entries.empty()) throw Error(ErrorKind::Parameter, "creation_terms: empty task list");
  const auto key = terms_key(manifest, cfg);
  CreationTerms terms;
  if (cache && !manifest.checksum.empty() && cache->lookup_terms(key, terms)) return terms;

  metrics::NoiseConfig noise_cfg;
  noise_cfg.sigma_ref = cfg.sigma_ref;
  double ssim_sum = 0.0, noise_sum = 0.0, id_sum = 0.0;
  for (const auto& id : tasks.entries) {
    const auto it = manifest.images.find(id);
    if (it == manifest.images.end()) {
      throw Error(ErrorKind::Coverage, "submission has no image for " + id.filename());
    }
    const auto ref = tasks.source_refs.find(id.id_s);
    if (ref == tasks.source_refs.end()) {
      throw Error(ErrorKind::NotFound, "no identity reference for source '" + id.id_s + "' (" +
                                           id.filename() + ")");
    }
    Image fake(8, 8);
    try {
      fake = read_png(it->second);
    } catch (const Error& e) {
      throw Error(e.kind(), "scoring aborted at " + id.filename() + ": " + e.what());
    }
    ssim_sum += metrics::ssim(fake, tasks.target(id));
    noise_sum += metrics::estimate_noise(fake, noise_cfg).score;
    id_sum += identity::id_similarity(fake, ref->second, provider).value;
  }
  const double n = static_cast<double>(tasks.entries.size());
  terms.ssim_mean = ssim_sum / n;
  terms.noise_mean = noise_sum / n;
  terms.id_mean = id_sum / n;
  terms.n_images = tasks.entries.size();
  if (cache && !manifest.checksum.empty()) cache->store_terms(key, terms);
  return terms;
}

CreationScoreBreakdown compose_creation(const CreationTerms& terms,
                                        std::vector<DetectorAuroc> per_detector,
                                        const CreationConfig& cfg) {
  CreationScoreBreakdown b;
  b.ssim_mean = terms.ssim_mean;
  b.noise_mean = terms.noise_mean;
  b.id_mean = terms.id_mean;
  b.noise_term_enabled = cfg.noise_term_enabled;
  b.n_detectors_used = per_detector.size();
  if (!per_detector.empty()) {
    double miss = 0.0;
    for (const auto& d : per_detector) miss += 1.0 - d.result.auroc;
    b.anti_detection = cfg.anti_coeff * (miss / static_cast<double>(per_detector.size()));
  }
  b.per_detector = std::move(per_detector);

  double total = b.ssim_mean;
  if (b.noise_term_enabled) total += b.noise_mean;
  total += b.id_mean;
  if (b.n_detectors_used > 0) total += b.anti_detection;
  b.total = total;
  return b;
}

CreationScoreBreakdown score_creation(const protocol::SubmissionManifest& manifest,
                                      const protocol::SwapTaskList& tasks,
                                      std::span<const agents::DetectorHandle> detectors,
                                      const protocol::ImageSet& real_set,
                                      const identity::EmbeddingProvider& provider,
                                      const CreationConfig& cfg, ScoreCache* cache) {
  if (!(cfg.anti_coeff >= 0.0)) throw Error(ErrorKind::Parameter, "anti_coeff must be >= 0");
  const auto terms = creation_terms(manifest, tasks, provider, cfg, cache);

  std::vector<DetectorAuroc> per_detector;
  if (!detectors.empty()) {
    if (real_set.empty()) throw Error(ErrorKind::Parameter, "score_creation: empty real set");
    const auto fakes = protocol::load_submission(manifest, tasks.entries);
    const auto fingerprint = real_set_fingerprint(real_set);
    for (const auto& det : detectors) {
      const auto reals = real_scores(*det, real_set, fingerprint, cache);
      const auto scores = det->score_set(fakes);
      per_detector.push_back({det->id(), stats::auroc(reals, scores)});
    }
  }
  return compose_creation(terms, std::move(per_detector), cfg);
}

std::vector<CreationScoreBreakdown> rescore(std::span<const protocol::SubmissionManifest> manifests,
                                            const protocol::SwapTaskList& tasks,
                                            std::span<const agents::DetectorHandle> detectors,
                                            const protocol::ImageSet& real_set,
                                            const identity::EmbeddingProvider& provider,
                                            const CreationConfig& cfg, ScoreCache* cache) {
  std::vector<CreationScoreBreakdown> out;
  out.reserve(manifests.size());
  for (const auto& m : manifests) {
    const auto now = protocol::submission_checksum(m.dir, tasks.entries);
    if (now != m.checksum) {
      throw Error(ErrorKind::Tamper, "submission of team '" + m.team + "' in " + m.phase.label() +
                                         " changed on disk: recorded " + m.checksum + ", found " + now);
    }
    out.push_back(score_creation(m, tasks, detectors, real_set, provider, cfg, cache));
  }
  return out;
}

nlohmann::ordered_json score_report(const std::string& team, PhaseId phase,
                                    const CreationScoreBreakdown& b) {
  nlohmann::ordered_json j;
  j["team"] = team;
  j["phase"] = phase.label();
  j["kind"] = "creation";
  j["ssim_mean"] = b.ssim_mean;
  j["noise_mean"] = b.noise_mean;
  j["id_mean"] = b.id_mean;
  j["anti_detection"] = b.anti_detection;
  j["total"] = b.total;
  j["n_detectors_used"] = b.n_detectors_used;
  j["noise_term_enabled"] = b.noise_term_enabled;
  auto per = nlohmann::ordered_json::array();
  for (const auto& d : b.per_detector) per.push_back({{"detector", d.detector}, {"auroc", d.result.auroc}});
  j["per_detector_auroc"] = per;
  j["per_dataset_auroc"] = nlohmann::ordered_json::object();
  return j;
}

nlohmann::ordered_json score_report(const std::string& team, PhaseId phase, const DetectionScore& s) {
  nlohmann::ordered_json j;
  j["team"] = team;
  j["phase"] = phase.label();
  j["kind"] = "detection";
  j["mean_auroc"] = s.mean_auroc;
  j["n_datasets"] = s.n_datasets;
  auto per = nlohmann::ordered_json::object();
  for (const auto& [id, r] : s.per_dataset) per[id] = r.auroc;
  j["per_dataset_auroc"] = per;
  return j;
}

}  // namespace dfgc::scoring
