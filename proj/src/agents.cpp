#include "dfgc/agents.hpp"

#include <algorithm>

#include "dfgc/error.hpp"
#include "dfgc/random.hpp"

namespace dfgc::agents {

namespace fs = std::filesystem;

namespace {

const protocol::SwapTaskList& tasks_of(const CreationContext& ctx) {
  if (!ctx.tasks) throw Error(ErrorKind::Parameter, "creation context has no task list");
  return *ctx.tasks;
}

const TrainingSet& training_of(const TrainingSet* t, const std::string& agent) {
  if (!t || t->reals.empty() || t->fakes.empty()) {
    throw Error(ErrorKind::Parameter, "agent '" + agent + "' needs a non-empty training set");
  }
  return *t;
}

Image read_raw(const CreationContext& ctx, const protocol::FaceSwapId& id) {
  return read_png(ctx.raw_swaps / id.filename());
}

LinearDetector train_surrogate(const TrainingSet& t, TrainConfig cfg, std::uint64_t seed,
                               const std::string& id) {
  cfg.seed = seed;
  return LinearDetector(id, train_toy_detector(t.reals, t.fakes, cfg).params);
}

TrainConfig train_config_from(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.lr = j.value("lr", cfg.lr);
  cfg.iters = j.value("iters", cfg.iters);
  cfg.init_scale = j.value("init_scale", cfg.init_scale);
  return cfg;
}

MaskStyle mask_style_from(const std::string& s) {
  if (s == "full") return MaskStyle::Full;
  if (s == "eroded") return MaskStyle::Eroded;
  if (s == "feathered") return MaskStyle::Feathered;
  throw Error(ErrorKind::Parameter, "unknown mask style '" + s + "'");
}

}  // namespace

TrainingSet load_training_set(const fs::path& root) {
  TrainingSet t;
  for (auto& item : protocol::load_image_dir(root / "real")) t.reals.push_back(std::move(item.image));
  for (const auto& id : protocol::read_task_file(root / "tasks.txt")) {
    t.fakes.push_back(read_png(root / "baseline" / id.filename()));
    t.targets.push_back(read_png(root / "real" / id.target_filename()));
    t.masks.push_back(read_mask_png(root / "masks" / id.target_filename()));
  }
  if (t.reals.empty() || t.fakes.empty()) {
    throw Error(ErrorKind::Parameter, "training set at " + root.string() + " is empty");
  }
  return t;
}

void CopyTargetCreator::create(const CreationContext& ctx, const fs::path& out_dir) const {
  const auto& tasks = tasks_of(ctx);
  fs::create_directories(out_dir);
  for (const auto& id : tasks.entries) write_png(out_dir / id.filename(), tasks.target(id));
}

void CopySwapCreator::create(const CreationContext& ctx, const fs::path& out_dir) const {
  const auto& tasks = tasks_of(ctx);
  fs::create_directories(out_dir);
  for (const auto& id : tasks.entries) {
    fs::copy_file(ctx.raw_swaps / id.filename(), out_dir / id.filename(),
                  fs::copy_options::overwrite_existing);
  }
}

double FgsmCreator::eps_for(int round) const {
  if (cfg_.eps_by_round.empty()) return kDefaultEps;
  const auto i = static_cast<std::size_t>(std::max(round, 1) - 1);
  return cfg_.eps_by_round[std::min(i, cfg_.eps_by_round.size() - 1)];
}

void FgsmCreator::create(const CreationContext& ctx, const fs::path& out_dir) const {
  const auto& tasks = tasks_of(ctx);
  const double eps = eps_for(ctx.phase.round);
  if (eps == 0.0 && !cfg_.blend) {
    CopySwapCreator(id_).create(ctx, out_dir);
    return;
  }
  const auto& training = training_of(ctx.training, id_);
  const auto surrogate =
      train_surrogate(training, cfg_.surrogate, derive_seed({ctx.seed, label_seed(id_)}), id_ + "-D");
  fs::create_directories(out_dir);
  for (const auto& id : tasks.entries) {
    const Plane mask = tasks.mask(id);
    Image out = fgsm_attack(read_raw(ctx, id), surrogate, eps, cfg_.face_only ? &mask : nullptr);
    if (cfg_.blend) {
      out.quantize8();
      out = blend_postprocess(out, tasks.target(id), make_blend_mask(mask, cfg_.blend_mask), cfg_.filter);
    }
    write_png(out_dir / id.filename(), out);
  }
}

void AdvNoiseCreator::create(const CreationContext& ctx, const fs::path& out_dir) const {
  const auto& tasks = tasks_of(ctx);
  const auto& training = training_of(ctx.training, id_);
  if (cfg_.n_classifiers < 1) throw Error(ErrorKind::Parameter, "adv-noise creator needs >= 1 classifier");
  std::vector<DetectorHandle> classifiers;
  for (int i = 0; i < cfg_.n_classifiers; ++i) {
    classifiers.push_back(std::make_shared<LinearDetector>(train_surrogate(
        training, cfg_.surrogate, derive_seed({ctx.seed, label_seed(id_), static_cast<std::uint64_t>(i)}),
        id_ + "-C" + std::to_string(i + 1))));
  }
  std::vector<Image> fakes;
  std::vector<Plane> masks;
  for (const auto& id : tasks.entries) {
    fakes.push_back(read_raw(ctx, id));
    masks.push_back(tasks.mask(id));
  }
  auto cfg = cfg_.noise;
  cfg.seed = derive_seed({ctx.seed, label_seed(id_), 0xAD});
  const auto res = adv_noise_train(fakes, training.reals, classifiers, masks, cfg);
  fs::create_directories(out_dir);
  for (std::size_t n = 0; n < fakes.size(); ++n) {
    write_png(out_dir / tasks.entries[n].filename(), res.fields[n].apply(fakes[n]));
  }
}

DetectorHandle ConstantDetectorAgent::build(const DetectionContext&) const {
  return std::make_shared<ConstantDetector>(id_, value_);
}

DetectorHandle LogisticDetectorAgent::build(const DetectionContext& ctx) const {
  const auto& t = training_of(ctx.training, id_);
  const std::uint64_t seed = derive_seed({ctx.seed, label_seed(id_)});
  std::vector<Image> fakes = t.fakes;
  std::size_t copies = 1;
  if (!cfg_.augment_eps.empty() && ctx.phase.round >= cfg_.augment_from_round) {
    const auto surrogate = train_surrogate(t, cfg_.train, derive_seed({seed, 0x5A}), id_ + "-S");
    const bool blend = cfg_.blend_from_round && ctx.phase.round >= *cfg_.blend_from_round;
    for (double eps : cfg_.augment_eps) {
      for (std::size_t i = 0; i < t.fakes.size(); ++i) {
        Image adv = fgsm_attack(t.fakes[i], surrogate, eps);
        adv.quantize8();
        if (blend) {
          Image b = blend_postprocess(adv, t.targets[i], make_blend_mask(t.masks[i], cfg_.blend_mask));
          b.quantize8();
          fakes.push_back(std::move(b));
        }
        fakes.push_back(std::move(adv));
      }
      copies += blend ? 2 : 1;
    }
  }
  // Repeat the reals so both classes keep their original proportion.
  std::vector<Image> reals;
  reals.reserve(t.reals.size() * copies);
  for (std::size_t c = 0; c < copies; ++c) reals.insert(reals.end(), t.reals.begin(), t.reals.end());
  auto cfg = cfg_.train;
  cfg.seed = seed;
  auto params = train_toy_detector(reals, fakes, cfg).params;
  params.trained_on = id_ + " " + ctx.phase.label() + " " + params.trained_on;
  return std::make_shared<LinearDetector>(id_, std::move(params));
}

CreatorHandle make_creator(const nlohmann::json& spec) {
  const std::string kind = spec.value("kind", "");
  const std::string id = spec.value("id", kind);
  if (kind == "copy-target") return std::make_shared<CopyTargetCreator>(id);
  if (kind == "copy") return std::make_shared<CopySwapCreator>(id);
  if (kind == "fgsm") {
    FgsmCreator::Config cfg;
    if (spec.contains("eps_by_round")) cfg.eps_by_round = spec["eps_by_round"].get<std::vector<double>>();
    cfg.face_only = spec.value("face_only", false);
    cfg.blend = spec.value("blend", false);
    cfg.blend_mask = mask_style_from(spec.value("blend_mask", "feathered"));
    cfg.surrogate = train_config_from(spec.value("train", nlohmann::json::object()));
    return std::make_shared<FgsmCreator>(id, std::move(cfg));
  }
  if (kind == "adv-noise") {
    AdvNoiseCreator::Config cfg;
    cfg.n_classifiers = spec.value("n_classifiers", cfg.n_classifiers);
    cfg.noise.iters = spec.value("iters", cfg.noise.iters);
    cfg.noise.step = spec.value("step", cfg.noise.step);
    cfg.noise.lambda_reg = spec.value("lambda_reg", cfg.noise.lambda_reg);
    cfg.noise.budget = spec.value("budget", cfg.noise.budget);
    cfg.noise.update_discriminators = spec.value("update_discriminators", cfg.noise.update_discriminators);
    cfg.surrogate = train_config_from(spec.value("train", nlohmann::json::object()));
    return std::make_shared<AdvNoiseCreator>(id, std::move(cfg));
  }
  throw Error(ErrorKind::Parameter, "unknown creator kind '" + kind + "'");
}

DetectorAgentHandle make_detector_agent(const nlohmann::json& spec) {
  const std::string kind = spec.value("kind", "");
  const std::string id = spec.value("id", kind);
  if (kind == "constant") return std::make_shared<ConstantDetectorAgent>(id, spec.value("value", 0.5));
  if (kind == "logistic") {
    LogisticDetectorAgent::Config cfg;
    cfg.train = train_config_from(spec.value("train", nlohmann::json::object()));
    if (spec.contains("augment_eps")) cfg.augment_eps = spec["augment_eps"].get<std::vector<double>>();
    cfg.augment_from_round = spec.value("augment_from_round", cfg.augment_from_round);
    if (spec.contains("blend_from_round")) cfg.blend_from_round = spec["blend_from_round"].get<int>();
    cfg.blend_mask = mask_style_from(spec.value("blend_mask", "feathered"));
    return std::make_shared<LogisticDetectorAgent>(id, std::move(cfg));
  }
  throw Error(ErrorKind::Parameter, "unknown detector agent kind '" + kind + "'");
}

}  // namespace dfgc::agents
