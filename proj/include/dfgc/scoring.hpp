#pragma once

#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfgc/detector.hpp"
#include "dfgc/identity.hpp"
#include "dfgc/imgmetrics.hpp"
#include "dfgc/phase.hpp"
#include "dfgc/protocol.hpp"
#include "dfgc/rocstats.hpp"

namespace dfgc::scoring {

/// A named fake image set evaluated by detectors.
struct FakeDataset {
  std::string id;
  protocol::ImageSet images;
};

struct DetectionScore {
  // Keyed by dataset id; the mean is accumulated in this order.
  std::map<std::string, stats::AurocResult> per_dataset;
  double mean_auroc = 0.0;
  std::size_t n_datasets = 0;
};

struct DetectorAuroc {
  std::string detector;
  stats::AurocResult result;
};

struct CreationConfig {
  bool noise_term_enabled = true;
  double anti_coeff = 2.0;
  double sigma_ref = metrics::kDefaultSigmaRef;
};

/// The detector-independent part of a creation score.
struct CreationTerms {
  double ssim_mean = 0.0;
  double noise_mean = 0.0;
  double id_mean = 0.0;
  std::size_t n_images = 0;
};

struct CreationScoreBreakdown {
  double ssim_mean = 0.0;
  double noise_mean = 0.0;
  double id_mean = 0.0;
  double anti_detection = 0.0;
  double total = 0.0;
  std::size_t n_detectors_used = 0;
  bool noise_term_enabled = true;
  std::vector<DetectorAuroc> per_detector;  // detector-list order
};

/// Memoises detector-independent creation terms by submission checksum and
/// real-set detector scores by detector spec. Safe for concurrent use.
class ScoreCache {
 public:
  bool lookup_terms(const std::string& key, CreationTerms& out) const;
  void store_terms(const std::string& key, const CreationTerms& terms);

  bool lookup_real_scores(const std::string& key, std::vector<double>& out) const;
  void store_real_scores(const std::string& key, std::vector<double> scores);

  std::size_t term_entries() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, CreationTerms> terms_;
  std::map<std::string, std::vector<double>> real_scores_;
};

/// Scores every real image once, then one AUROC per fake dataset; the mean
/// is taken over datasets in id order.
DetectionScore score_detection(const agents::Detector& detector, const protocol::ImageSet& real_set,
                               std::span<const FakeDataset> fake_sets, ScoreCache* cache = nullptr);

/// SSIM against the target, noise score and identity similarity to the
/// source reference, averaged in task-list order.
CreationTerms creation_terms(const protocol::SubmissionManifest& manifest,
                             const protocol::SwapTaskList& tasks,
                             const identity::EmbeddingProvider& provider, const CreationConfig& cfg = {},
                             ScoreCache* cache = nullptr);

/// Combines the cached terms with the anti-detection term:
/// total = ((ssim + noise) + id) + anti, noise omitted when disabled and anti
/// zero without detectors.
CreationScoreBreakdown compose_creation(const CreationTerms& terms,
                                        std::vector<DetectorAuroc> per_detector,
                                        const CreationConfig& cfg);

CreationScoreBreakdown score_creation(const protocol::SubmissionManifest& manifest,
                                      const protocol::SwapTaskList& tasks,
                                      std::span<const agents::DetectorHandle> detectors,
                                      const protocol::ImageSet& real_set,
                                      const identity::EmbeddingProvider& provider,
                                      const CreationConfig& cfg = {}, ScoreCache* cache = nullptr);

/// Re-runs score_creation against a new detector list after checking that
/// each submission directory still hashes to its recorded checksum.
std::vector<CreationScoreBreakdown> rescore(std::span<const protocol::SubmissionManifest> manifests,
                                            const protocol::SwapTaskList& tasks,
                                            std::span<const agents::DetectorHandle> detectors,
                                            const protocol::ImageSet& real_set,
                                            const identity::EmbeddingProvider& provider,
                                            const CreationConfig& cfg = {}, ScoreCache* cache = nullptr);

/// Score report with a fixed field order:
/// team, phase, kind, ssim_mean, noise_mean, id_mean, anti_detection, total,
/// n_detectors_used, noise_term_enabled, per_detector_auroc (array of
/// {detector, auroc} in detector-list order), per_dataset_auroc.
nlohmann::ordered_json score_report(const std::string& team, PhaseId phase,
                                    const CreationScoreBreakdown& breakdown);
/// team, phase, kind, mean_auroc, n_datasets, per_dataset_auroc.
nlohmann::ordered_json score_report(const std::string& team, PhaseId phase, const DetectionScore& score);

}  // namespace dfgc::scoring
