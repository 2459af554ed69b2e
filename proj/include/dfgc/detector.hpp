#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfgc/image.hpp"
#include "dfgc/protocol.hpp"
#include "dfgc/resample.hpp"

namespace dfgc::agents {

/// Maps an image to a finite fakeness score (higher = more fake).
///
/// White-box detectors also expose the fakeness logit and its gradient with
/// respect to every pixel sample, laid out like Image::data().
class Detector {
 public:
  virtual ~Detector() = default;

  virtual const std::string& id() const = 0;
  virtual double score(const Image& img) const = 0;

  virtual bool white_box() const { return false; }
  virtual double logit(const Image& img) const;
  virtual std::vector<double> gradient(const Image& img) const;

  /// Scores a set in order. Throws ErrorKind::DetectorFault naming the image
  /// if any score is not finite.
  virtual std::vector<double> score_set(const protocol::ImageSet& images) const;

  /// Serialised form accepted by make_detector().
  virtual nlohmann::ordered_json spec() const = 0;
};

using DetectorHandle = std::shared_ptr<const Detector>;

/// Rebuilds a detector from its spec(); `id` overrides the stored id when
/// non-empty.
DetectorHandle make_detector(const nlohmann::ordered_json& spec, const std::string& id = "");

class ConstantDetector final : public Detector {
 public:
  ConstantDetector(std::string id, double value);
  const std::string& id() const override { return id_; }
  double score(const Image&) const override { return value_; }
  nlohmann::ordered_json spec() const override;

 private:
  std::string id_;
  double value_;
};

/// Chance-level detector: a uniform score derived from the image bytes.
class HashDetector final : public Detector {
 public:
  HashDetector(std::string id, std::uint64_t salt) : id_(std::move(id)), salt_(salt) {}
  const std::string& id() const override { return id_; }
  double score(const Image& img) const override;
  nlohmann::ordered_json spec() const override;

 private:
  std::string id_;
  std::uint64_t salt_;
};

inline constexpr std::size_t kToyFeatures = kToyGrid * kToyGrid;

/// Mean-centred 16x16 luma thumbnail.
std::vector<double> toy_features(const Image& img);

struct ToyDetectorParams {
  std::vector<double> weights = std::vector<double>(kToyFeatures, 0.0);
  double bias = 0.0;
  std::string trained_on;
};

/// logit = w . phi(img) + b, scored as the logit itself.
class LinearDetector final : public Detector {
 public:
  LinearDetector(std::string id, ToyDetectorParams params);

  const std::string& id() const override { return id_; }
  double score(const Image& img) const override { return logit(img); }
  bool white_box() const override { return true; }
  double logit(const Image& img) const override;
  std::vector<double> gradient(const Image& img) const override;
  nlohmann::ordered_json spec() const override;

  const ToyDetectorParams& params() const noexcept { return params_; }
  double logit_from_features(std::span<const double> features) const;

 private:
  std::string id_;
  ToyDetectorParams params_;
};

struct TrainConfig {
  double lr = 0.1;
  int iters = 500;
  std::uint64_t seed = 0;
  double init_scale = 0.01;
};

struct TrainResult {
  ToyDetectorParams params;
  std::vector<double> loss_trace;
  // Set when every training feature vector is identical.
  bool convergence_warning = false;
};

struct BceObjective {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

/// Mean binary cross-entropy of sigmoid(w . x + b) against 0/1 labels, with
/// its gradient.
BceObjective bce_objective(std::span<const std::vector<double>> features, std::span<const double> labels,
                           const ToyDetectorParams& params);

/// Full-batch gradient descent on the mean binary cross-entropy, fake = 1.
TrainResult train_toy_detector(std::span<const Image> real, std::span<const Image> fake,
                               const TrainConfig& cfg = {});

/// Black-box detector speaking a line protocol with a child process.
///
/// The child prints "DFGC-DETECTOR 1" on start-up, then answers each
/// "SCORE\t<path>" request line with "<path>\t<float>".
class ExternalDetector final : public Detector {
 public:
  struct Config {
    std::vector<std::string> command;
    std::chrono::milliseconds timeout{10000};
    std::size_t batch_size = 32;
  };

  ExternalDetector(std::string id, Config cfg);
  ~ExternalDetector() override;
  ExternalDetector(const ExternalDetector&) = delete;
  ExternalDetector& operator=(const ExternalDetector&) = delete;

  const std::string& id() const override { return id_; }
  double score(const Image& img) const override;
  std::vector<double> score_set(const protocol::ImageSet& images) const override;
  nlohmann::ordered_json spec() const override;

  std::vector<double> score_paths(const std::vector<std::string>& paths) const;

 private:
  struct Process;

  void ensure_started() const;
  void shutdown() const noexcept;
  std::string read_line(std::chrono::steady_clock::time_point deadline, const std::string& waiting_for) const;

  std::string id_;
  Config cfg_;
  mutable std::mutex mu_;
  mutable std::unique_ptr<Process> proc_;
};

DetectorHandle external_detector(const std::string& id, const ExternalDetector::Config& cfg);

}  // namespace dfgc::agents
