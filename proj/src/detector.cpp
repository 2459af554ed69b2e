#include "dfgc/detector.hpp"

#include <cmath>
#include <numeric>

#include "dfgc/digest.hpp"
#include "dfgc/error.hpp"
#include "dfgc/random.hpp"

namespace dfgc::agents {

double Detector::logit(const Image&) const {
  throw Error(ErrorKind::Capability, "detector '" + id() + "' is black-box (no logit)");
}

std::vector<double> Detector::gradient(const Image&) const {
  throw Error(ErrorKind::Capability, "detector '" + id() + "' is black-box (no gradient)");
}

std::vector<double> Detector::score_set(const protocol::ImageSet& images) const {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& item : images) {
    const double s = score(item.image);
    if (!std::isfinite(s)) {
      throw Error(ErrorKind::DetectorFault,
                  "detector '" + id() + "' returned a non-finite score for " + item.name);
    }
    out.push_back(s);
  }
  return out;
}

ConstantDetector::ConstantDetector(std::string id, double value) : id_(std::move(id)), value_(value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::Parameter, "constant detector value must be finite");
}

nlohmann::ordered_json ConstantDetector::spec() const {
  return {{"kind", "constant"}, {"id", id_}, {"value", value_}};
}

double HashDetector::score(const Image& img) const {
  const auto hex = sha256_hex(img.to_bytes());
  const std::uint64_t h = mix64(std::stoull(hex.substr(0, 15), nullptr, 16) ^ salt_);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

nlohmann::ordered_json HashDetector::spec() const {
  return {{"kind", "hash"}, {"id", id_}, {"salt", salt_}};
}

std::vector<double> toy_features(const Image& img) {
  auto feat = downsample_luma(img, kToyGrid);
  const double mean = std::accumulate(feat.begin(), feat.end(), 0.0) / static_cast<double>(feat.size());
  for (double& f : feat) f -= mean;
  return feat;
}

LinearDetector::LinearDetector(std::string id, ToyDetectorParams params)
    : id_(std::move(id)), params_(std::move(params)) {
  if (params_.weights.size() != kToyFeatures) {
    throw Error(ErrorKind::Shape, "linear detector expects " + std::to_string(kToyFeatures) + " weights");
  }
  for (double w : params_.weights) {
    if (!std::isfinite(w)) throw Error(ErrorKind::Parameter, "linear detector weights must be finite");
  }
  if (!std::isfinite(params_.bias)) throw Error(ErrorKind::Parameter, "linear detector bias must be finite");
}

double LinearDetector::logit_from_features(std::span<const double> features) const {
  double z = params_.bias;
  for (std::size_t k = 0; k < kToyFeatures; ++k) z += params_.weights[k] * features[k];
  return z;
}

double LinearDetector::logit(const Image& img) const { return logit_from_features(toy_features(img)); }

std::vector<double> LinearDetector::gradient(const Image& img) const {
  // d logit / d thumbnail_j = w_j - mean(w) because of the mean centring.
  const double wmean = std::accumulate(params_.weights.begin(), params_.weights.end(), 0.0) /
                       static_cast<double>(kToyFeatures);
  const auto tx = bilinear_taps(img.width(), kToyGrid);
  const auto ty = bilinear_taps(img.height(), kToyGrid);
  std::vector<double> grad(img.size(), 0.0);
  for (int gy = 0; gy < kToyGrid; ++gy) {
    for (int gx = 0; gx < kToyGrid; ++gx) {
      const double wc = params_.weights[gy * kToyGrid + gx] - wmean;
      for (const Tap& a : ty[gy]) {
        for (const Tap& b : tx[gx]) {
          const double g = wc * a.weight * b.weight;
          const std::size_t base = img.index(b.index, a.index, 0);
          grad[base + 0] += g * kLumaR;
          grad[base + 1] += g * kLumaG;
          grad[base + 2] += g * kLumaB;
        }
      }
    }
  }
  return grad;
}

nlohmann::ordered_json LinearDetector::spec() const {
  return {{"kind", "linear"},
          {"id", id_},
          {"bias", params_.bias},
          {"trained_on", params_.trained_on},
          {"weights", params_.weights}};
}

namespace {

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

BceObjective bce_objective(std::span<const std::vector<double>> features, std::span<const double> labels,
                           const ToyDetectorParams& params) {
  if (features.size() != labels.size() || features.empty()) {
    throw Error(ErrorKind::Shape, "bce_objective: need one label per feature vector");
  }
  const auto& w = params.weights;
  BceObjective out;
  out.grad_w.assign(w.size(), 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& x = features[i];
    if (x.size() != w.size()) throw Error(ErrorKind::Shape, "bce_objective: feature length mismatch");
    double z = params.bias;
    for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * x[k];
    out.loss += labels[i] > 0.5 ? log1pexp(-z) : log1pexp(z);
    const double r = sigmoid(z) - labels[i];
    for (std::size_t k = 0; k < w.size(); ++k) out.grad_w[k] += r * x[k];
    out.grad_b += r;
  }
  const double n = static_cast<double>(features.size());
  out.loss /= n;
  for (double& g : out.grad_w) g /= n;
  out.grad_b /= n;
  return out;
}

TrainResult train_toy_detector(std::span<const Image> real, std::span<const Image> fake,
                               const TrainConfig& cfg) {
  if (real.empty() || fake.empty()) {
    throw Error(ErrorKind::Parameter, "train_toy_detector: both image sets must be non-empty");
  }
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& img : real) {
    x.push_back(toy_features(img));
    y.push_back(0.0);
  }
  for (const auto& img : fake) {
    x.push_back(toy_features(img));
    y.push_back(1.0);
  }

  TrainResult result;
  result.convergence_warning =
      std::all_of(x.begin(), x.end(), [&](const std::vector<double>& v) {
        for (std::size_t k = 0; k < v.size(); ++k) {
          if (std::abs(v[k] - x.front()[k]) > 1e-12) return false;
        }
        return true;
      });

  Rng rng(derive_seed({cfg.seed, 0x7D}));
  auto& w = result.params.weights;
  for (double& wk : w) wk = cfg.init_scale * rng.normal();
  double& b = result.params.bias;
  for (int it = 0; it < cfg.iters; ++it) {
    const auto obj = bce_objective(x, y, result.params);
    result.loss_trace.push_back(obj.loss);
    for (std::size_t k = 0; k < kToyFeatures; ++k) w[k] -= cfg.lr * obj.grad_w[k];
    b -= cfg.lr * obj.grad_b;
  }
  result.params.trained_on = "toy-logistic n_real=" + std::to_string(real.size()) +
                             " n_fake=" + std::to_string(fake.size()) +
                             " iters=" + std::to_string(cfg.iters) + " seed=" + std::to_string(cfg.seed);
  return result;
}

DetectorHandle make_detector(const nlohmann::ordered_json& spec, const std::string& id_override) {
  const std::string kind = spec.value("kind", "");
  const std::string id = id_override.empty() ? spec.value("id", kind) : id_override;
  if (kind == "constant") return std::make_shared<ConstantDetector>(id, spec.value("value", 0.5));
  if (kind == "hash") return std::make_shared<HashDetector>(id, spec.value("salt", std::uint64_t{0}));
  if (kind == "linear") {
    ToyDetectorParams p;
    p.weights = spec.at("weights").get<std::vector<double>>();
    p.bias = spec.value("bias", 0.0);
    p.trained_on = spec.value("trained_on", "");
    return std::make_shared<LinearDetector>(id, std::move(p));
  }
  if (kind == "external") {
    ExternalDetector::Config cfg;
    cfg.command = spec.at("command").get<std::vector<std::string>>();
    cfg.timeout = std::chrono::milliseconds(spec.value("timeout_ms", 10000));
    cfg.batch_size = spec.value("batch_size", std::size_t{32});
    return std::make_shared<ExternalDetector>(id, std::move(cfg));
  }
  throw Error(ErrorKind::Parameter, "unknown detector kind '" + kind + "'");
}

}  // namespace dfgc::agents
