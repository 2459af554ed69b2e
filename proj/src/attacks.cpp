#include "dfgc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfgc/error.hpp"
#include "dfgc/random.hpp"

namespace dfgc::agents {

namespace {

void require_mask_shape(const Plane& mask, const Image& img, const char* what) {
  if (mask.width != img.width() || mask.height != img.height()) {
    throw Error(ErrorKind::Shape, std::string(what) + ": mask " + std::to_string(mask.width) + "x" +
                                      std::to_string(mask.height) + " vs image " +
                                      std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Plane gaussian_blur(const Plane& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  Plane rows(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = x + k;
        if (xx < 0 || xx >= in.width) continue;
        acc += taps[k + radius] * in.at(xx, y);
        norm += taps[k + radius];
      }
      rows.at(x, y) = acc / norm;
    }
  }
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = y + k;
        if (yy < 0 || yy >= in.height) continue;
        acc += taps[k + radius] * rows.at(x, yy);
        norm += taps[k + radius];
      }
      out.at(x, y) = std::clamp(acc / norm, 0.0, 1.0);
    }
  }
  return out;
}

Plane erode(const Plane& in, int radius) {
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double m = 1.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = std::clamp(x + dx, 0, in.width - 1);
          const int yy = std::clamp(y + dy, 0, in.height - 1);
          m = std::min(m, in.at(xx, yy));
        }
      }
      out.at(x, y) = m;
    }
  }
  return out;
}

double sample_bilinear(const Plane& p, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(p.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(p.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, p.width - 1);
  const int y1 = std::min(y0 + 1, p.height - 1);
  const double tx = x - x0;
  const double ty = y - y0;
  return (1 - ty) * ((1 - tx) * p.at(x0, y0) + tx * p.at(x1, y0)) +
         ty * ((1 - tx) * p.at(x0, y1) + tx * p.at(x1, y1));
}

}  // namespace

Image fgsm_attack(const Image& img, const Detector& detector, double eps, const Plane* mask) {
  if (!detector.white_box()) {
    throw Error(ErrorKind::Capability, "fgsm_attack: detector '" + detector.id() + "' has no gradient");
  }
  if (!(eps >= 0.0)) throw Error(ErrorKind::Parameter, "fgsm_attack: eps must be >= 0");
  if (mask) require_mask_shape(*mask, img, "fgsm_attack");
  const auto grad = detector.gradient(img);
  Image out = img;
  auto data = out.data();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double m = mask ? mask->at(x, y) : 1.0;
      for (int c = 0; c < Image::kChannels; ++c) {
        const std::size_t i = img.index(x, y, c);
        data[i] = std::clamp(data[i] - eps * sign(grad[i]) * m, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image PerturbationField::apply(const Image& img) const {
  require_mask_shape(mask, img, "perturbation");
  Image out = img;
  auto data = out.data();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double m = mask.at(x, y);
      for (int c = 0; c < Image::kChannels; ++c) {
        const std::size_t i = img.index(x, y, c);
        data[i] = std::clamp(data[i] + m * delta[i], 0.0, 1.0);
      }
    }
  }
  return out;
}

double PerturbationField::max_abs() const {
  double m = 0.0;
  for (double d : delta) m = std::max(m, std::abs(d));
  return m;
}

AdvNoiseResult adv_noise_train(std::span<const Image> fakes, std::span<const Image> reals,
                               std::span<const DetectorHandle> classifiers,
                               std::span<const Plane> masks, const AdvNoiseConfig& cfg) {
  if (classifiers.empty()) throw Error(ErrorKind::Parameter, "adv_noise_train: no classifiers");
  if (fakes.empty()) throw Error(ErrorKind::Parameter, "adv_noise_train: no fake images");
  if (!masks.empty() && masks.size() != fakes.size()) {
    throw Error(ErrorKind::Shape, "adv_noise_train: one mask per fake image required");
  }
  if (!(cfg.step > 0.0) || !(cfg.lambda_reg >= 0.0) || !(cfg.budget >= 0.0)) {
    throw Error(ErrorKind::Parameter, "adv_noise_train: step > 0, lambda_reg >= 0, budget >= 0 required");
  }
  for (const auto& c : classifiers) {
    if (!c || !c->white_box()) {
      throw Error(ErrorKind::Capability, "adv_noise_train: every classifier must be white-box");
    }
  }

  // Discriminators start as copies of the classifiers.
  std::vector<ToyDetectorParams> disc;
  if (cfg.update_discriminators) {
    if (reals.empty()) throw Error(ErrorKind::Parameter, "adv_noise_train: discriminator updates need reals");
    for (const auto& c : classifiers) {
      const auto* lin = dynamic_cast<const LinearDetector*>(c.get());
      if (!lin) {
        throw Error(ErrorKind::Capability,
                    "adv_noise_train: discriminator updates need linear classifiers ('" + c->id() + "')");
      }
      disc.push_back(lin->params());
    }
  }

  AdvNoiseResult result;
  result.fields.resize(fakes.size());
  for (std::size_t n = 0; n < fakes.size(); ++n) {
    result.fields[n].delta.assign(fakes[n].size(), 0.0);
    if (masks.empty()) {
      result.fields[n].mask = Plane(fakes[n].width(), fakes[n].height(), 1.0);
    } else {
      require_mask_shape(masks[n], fakes[n], "adv_noise_train");
      result.fields[n].mask = masks[n];
    }
  }

  auto perturbed = [&](std::size_t n) {
    Image y = fakes[n];
    auto data = y.data();
    const auto& f = result.fields[n];
    for (int py = 0; py < y.height(); ++py) {
      for (int px = 0; px < y.width(); ++px) {
        const double m = f.mask.at(px, py);
        for (int c = 0; c < Image::kChannels; ++c) {
          const std::size_t i = y.index(px, py, c);
          data[i] += m * f.delta[i];
        }
      }
    }
    return y;
  };

  auto discriminators = [&]() {
    std::vector<DetectorHandle> out;
    if (cfg.update_discriminators) {
      for (std::size_t i = 0; i < disc.size(); ++i) {
        out.push_back(std::make_shared<LinearDetector>("D" + std::to_string(i), disc[i]));
      }
    } else {
      out.assign(classifiers.begin(), classifiers.end());
    }
    return out;
  };

  auto losses = [&](const std::vector<DetectorHandle>& ds, double& adv, double& reg) {
    adv = 0.0;
    reg = 0.0;
    for (std::size_t n = 0; n < fakes.size(); ++n) {
      const Image y = perturbed(n);
      for (std::size_t i = 0; i < classifiers.size(); ++i) {
        adv += log_sigmoid(ds[i]->logit(y)) + log_sigmoid(classifiers[i]->logit(y));
      }
      for (double d : result.fields[n].delta) reg += d * d;
    }
    reg *= cfg.lambda_reg;
  };

  const double shrink = 1.0 / (1.0 + 2.0 * cfg.step * cfg.lambda_reg);
  double initial = 0.0;
  for (int it = 0; it <= cfg.iters; ++it) {
    const auto ds = discriminators();
    double adv = 0.0, reg = 0.0;
    losses(ds, adv, reg);
    result.adv_loss.push_back(adv);
    result.reg_loss.push_back(reg);
    if (it == 0) initial = adv + reg;
    if (!std::isfinite(adv + reg) || (adv + reg) - initial > 10.0 * std::max(std::abs(initial), 1e-12)) {
      throw Error(ErrorKind::Divergence, "adv_noise_train: loss rose from " + std::to_string(initial) +
                                             " to " + std::to_string(adv + reg) + " at iteration " +
                                             std::to_string(it));
    }
    if (it == cfg.iters) break;

    // Perturbation step: gradient on the adversarial term, proximal step on
    // the quadratic term, projection onto the budget box.
    std::vector<Image> current;
    current.reserve(fakes.size());
    for (std::size_t n = 0; n < fakes.size(); ++n) current.push_back(perturbed(n));
    for (std::size_t n = 0; n < fakes.size(); ++n) {
      const Image& y = current[n];
      std::vector<double> g(y.size(), 0.0);
      for (std::size_t i = 0; i < classifiers.size(); ++i) {
        for (const DetectorHandle& det : {ds[i], classifiers[i]}) {
          const double coeff = sigmoid(-det->logit(y));  // d log sigmoid(z) / dz
          const auto grad = det->gradient(y);
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += coeff * grad[k];
        }
      }
      auto& f = result.fields[n];
      for (int py = 0; py < y.height(); ++py) {
        for (int px = 0; px < y.width(); ++px) {
          const double m = f.mask.at(px, py);
          for (int c = 0; c < Image::kChannels; ++c) {
            const std::size_t k = y.index(px, py, c);
            const double v = (f.delta[k] - cfg.step * m * g[k]) * shrink;
            f.delta[k] = std::clamp(v, -cfg.budget, cfg.budget);
          }
        }
      }
    }

    if (cfg.update_discriminators) {
      // Descent on mean log D(X) + mean log(1 - D(Y_a)): reals pushed to 0,
      // evolving fakes pushed to 1.
      std::vector<std::vector<double>> real_feat, fake_feat;
      for (const auto& r : reals) real_feat.push_back(toy_features(r));
      for (std::size_t n = 0; n < fakes.size(); ++n) fake_feat.push_back(toy_features(perturbed(n)));
      for (auto& p : disc) {
        const LinearDetector d("D", p);
        std::vector<double> gw(kToyFeatures, 0.0);
        double gb = 0.0;
        for (const auto& x : real_feat) {
          const double s = sigmoid(-d.logit_from_features(x));
          for (std::size_t k = 0; k < kToyFeatures; ++k) gw[k] += s * x[k] / real_feat.size();
          gb += s / real_feat.size();
        }
        for (const auto& x : fake_feat) {
          const double s = -sigmoid(d.logit_from_features(x));
          for (std::size_t k = 0; k < kToyFeatures; ++k) gw[k] += s * x[k] / fake_feat.size();
          gb += s / fake_feat.size();
        }
        for (std::size_t k = 0; k < kToyFeatures; ++k) p.weights[k] -= cfg.disc_step * gw[k];
        p.bias -= cfg.disc_step * gb;
      }
    }
  }
  return result;
}

Plane make_blend_mask(const Plane& face, MaskStyle style) {
  switch (style) {
    case MaskStyle::Full: return face;
    case MaskStyle::Eroded: return erode(face, 2);
    case MaskStyle::Feathered: return gaussian_blur(face, 2.0);
  }
  return face;
}

Image blend_postprocess(const Image& fake, const Image& target, const Plane& mask,
                        const FilterConfig& filter) {
  if (!fake.same_shape(target)) {
    throw Error(ErrorKind::Shape, "blend_postprocess: fake and target sizes differ");
  }
  require_mask_shape(mask, fake, "blend_postprocess");
  const Image filtered =
      filter.enabled ? metrics::bilateral_filter(fake, filter.spatial_sigma, filter.range_sigma) : fake;
  Image out(fake.width(), fake.height());
  for (int y = 0; y < fake.height(); ++y) {
    for (int x = 0; x < fake.width(); ++x) {
      const double m = mask.at(x, y);
      for (int c = 0; c < Image::kChannels; ++c) {
        out.at(x, y, c) = m * filtered.at(x, y, c) + (1.0 - m) * target.at(x, y, c);
      }
    }
  }
  return out;
}

AugmentResult blend_augment(const Image& fake_fg, const Image& real_bg, const Plane& mask,
                            std::uint64_t seed) {
  if (!fake_fg.same_shape(real_bg)) {
    throw Error(ErrorKind::Shape, "blend_augment: foreground and background sizes differ");
  }
  require_mask_shape(mask, fake_fg, "blend_augment");
  Rng rng(derive_seed({seed, 0xB1E4D}));
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 3> wx{}, wy{};
  for (auto* set : {&wx, &wy}) {
    for (auto& w : *set) {
      w = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * std::numbers::pi),
           rng.uniform(0.5, 1.0)};
    }
  }
  const double amplitude = 2.0;
  const int w = mask.width;
  const int h = mask.height;
  Plane deformed(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double dx = 0.0, dy = 0.0;
      for (const auto& t : wx) dx += t.amp * std::sin(2.0 * std::numbers::pi * (t.fx * x / w + t.fy * y / h) + t.phase);
      for (const auto& t : wy) dy += t.amp * std::sin(2.0 * std::numbers::pi * (t.fx * x / w + t.fy * y / h) + t.phase);
      deformed.at(x, y) = sample_bilinear(mask, x + amplitude * dx / 3.0, y + amplitude * dy / 3.0);
    }
  }
  const Plane alpha = gaussian_blur(deformed, 1.5);
  AugmentResult result{Image(w, h), std::all_of(alpha.values.begin(), alpha.values.end(),
                                                [](double v) { return v == 0.0; })};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = alpha.at(x, y);
      for (int c = 0; c < Image::kChannels; ++c) {
        result.image.at(x, y, c) = a * fake_fg.at(x, y, c) + (1.0 - a) * real_bg.at(x, y, c);
      }
    }
  }
  return result;
}

double aggregate_multiclass(double p0, double p1, double p2) {
  for (double p : {p0, p1, p2}) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::Parameter, "aggregate_multiclass: probabilities must be finite and >= 0");
    }
  }
  if (std::abs(p0 + p1 + p2 - 1.0) > 1e-6) {
    throw Error(ErrorKind::Parameter, "aggregate_multiclass: probabilities must sum to 1");
  }
  return 1.0 - p0;
}

}  // namespace dfgc::agents
