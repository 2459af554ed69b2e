#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfgc/attacks.hpp"
#include "dfgc/detector.hpp"
#include "dfgc/phase.hpp"
#include "dfgc/protocol.hpp"

namespace dfgc::agents {

/// Labelled images a participant may train on: real frames plus the
/// generator's swaps with the target frame and face mask of each.
struct TrainingSet {
  std::vector<Image> reals;
  std::vector<Image> fakes;
  std::vector<Image> targets;
  std::vector<Plane> masks;
};

/// Reads real/, baseline/, masks/ and tasks.txt of a generated dataset.
TrainingSet load_training_set(const std::filesystem::path& root);

struct CreationContext {
  PhaseId phase;
  const protocol::SwapTaskList* tasks = nullptr;
  /// The participant's own raw swaps, one per task, named canonically.
  std::filesystem::path raw_swaps;
  const TrainingSet* training = nullptr;
  std::uint64_t seed = 0;
};

class CreatorAgent {
 public:
  virtual ~CreatorAgent() = default;
  virtual const std::string& id() const = 0;
  /// Writes one PNG per task into `out_dir` (created if missing).
  virtual void create(const CreationContext& ctx, const std::filesystem::path& out_dir) const = 0;
};

using CreatorHandle = std::shared_ptr<const CreatorAgent>;

struct DetectionContext {
  PhaseId phase;
  const TrainingSet* training = nullptr;
  std::uint64_t seed = 0;
};

class DetectorAgent {
 public:
  virtual ~DetectorAgent() = default;
  virtual const std::string& id() const = 0;
  virtual DetectorHandle build(const DetectionContext& ctx) const = 0;
};

using DetectorAgentHandle = std::shared_ptr<const DetectorAgent>;

/// Submits each task's target frame unchanged.
class CopyTargetCreator final : public CreatorAgent {
 public:
  explicit CopyTargetCreator(std::string id) : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  void create(const CreationContext& ctx, const std::filesystem::path& out_dir) const override;

 private:
  std::string id_;
};

/// Submits the raw swaps unchanged.
class CopySwapCreator final : public CreatorAgent {
 public:
  explicit CopySwapCreator(std::string id) : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  void create(const CreationContext& ctx, const std::filesystem::path& out_dir) const override;

 private:
  std::string id_;
};

/// Trains its own logistic detector on the training set, attacks the raw
/// swaps with FGSM and optionally blends the result back into the target.
class FgsmCreator final : public CreatorAgent {
 public:
  struct Config {
    /// Step size per creation round; rounds past the end reuse the last.
    std::vector<double> eps_by_round{kDefaultEps};
    bool face_only = false;
    bool blend = false;
    MaskStyle blend_mask = MaskStyle::Feathered;
    FilterConfig filter;
    TrainConfig surrogate;
  };

  FgsmCreator(std::string id, Config cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {}
  const std::string& id() const override { return id_; }
  void create(const CreationContext& ctx, const std::filesystem::path& out_dir) const override;
  double eps_for(int round) const;

 private:
  std::string id_;
  Config cfg_;
};

/// Perturbs the raw swaps with adv_noise_train against several self-trained
/// logistic classifiers.
class AdvNoiseCreator final : public CreatorAgent {
 public:
  struct Config {
    int n_classifiers = 2;
    AdvNoiseConfig noise;
    TrainConfig surrogate;
  };

  AdvNoiseCreator(std::string id, Config cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {}
  const std::string& id() const override { return id_; }
  void create(const CreationContext& ctx, const std::filesystem::path& out_dir) const override;

 private:
  std::string id_;
  Config cfg_;
};

class ConstantDetectorAgent final : public DetectorAgent {
 public:
  ConstantDetectorAgent(std::string id, double value = 0.5) : id_(std::move(id)), value_(value) {}
  const std::string& id() const override { return id_; }
  DetectorHandle build(const DetectionContext& ctx) const override;

 private:
  std::string id_;
  double value_;
};

/// Logistic detector on the toy features. With augmentation enabled it first
/// trains a surrogate, attacks the training fakes with FGSM at every listed
/// eps and adds those images (and optionally their blended versions) to the
/// fake class.
class LogisticDetectorAgent final : public DetectorAgent {
 public:
  struct Config {
    TrainConfig train;
    std::vector<double> augment_eps;
    /// First detection round in which augmentation is applied.
    int augment_from_round = 1;
    /// First detection round from which blended adversarial fakes are added.
    std::optional<int> blend_from_round;
    MaskStyle blend_mask = MaskStyle::Feathered;
  };

  LogisticDetectorAgent(std::string id, Config cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {}
  const std::string& id() const override { return id_; }
  DetectorHandle build(const DetectionContext& ctx) const override;

 private:
  std::string id_;
  Config cfg_;
};

/// Builds agents from JSON descriptions such as
///   {"kind": "fgsm", "id": "team", "eps_by_round": [0, 0.0157, 0.0314], "blend": true}
///   {"kind": "logistic", "id": "team", "augment_eps": [0.0314], "augment_from_round": 3}
CreatorHandle make_creator(const nlohmann::json& spec);
DetectorAgentHandle make_detector_agent(const nlohmann::json& spec);

}  // namespace dfgc::agents
