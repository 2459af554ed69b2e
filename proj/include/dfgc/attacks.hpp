#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dfgc/detector.hpp"
#include "dfgc/image.hpp"
#include "dfgc/imgmetrics.hpp"

namespace dfgc::agents {

inline constexpr double kDefaultEps = 8.0 / 255.0;

/// One signed gradient step towards "real":
/// x' = clamp(x - eps * sign(d logit / dx) * mask, 0, 1).
/// Throws ErrorKind::Capability for black-box detectors.
Image fgsm_attack(const Image& img, const Detector& detector, double eps = kDefaultEps,
                  const Plane* mask = nullptr);

/// Additive perturbation restricted by a per-pixel mask.
struct PerturbationField {
  std::vector<double> delta;  // same layout as Image::data()
  Plane mask;

  /// clamp(img + mask * delta, 0, 1)
  Image apply(const Image& img) const;
  double max_abs() const;
};

struct AdvNoiseConfig {
  int iters = 40;
  double step = 0.002;
  double lambda_reg = 1.0;
  double budget = kDefaultEps;
  bool update_discriminators = false;
  double disc_step = 0.05;
  std::uint64_t seed = 0;
};

struct AdvNoiseResult {
  std::vector<PerturbationField> fields;
  /// Summed adversarial loss over all images, recorded before each update
  /// and once after the last one (iters + 1 entries).
  std::vector<double> adv_loss;
  std::vector<double> reg_loss;
};

/// Optimises one perturbation per fake image so that every frozen classifier
/// and every evolving discriminator (initialised from it) rates the result
/// as real; squared-norm regularised and projected onto the L-inf budget.
/// Discriminator updates need LinearDetector classifiers.
AdvNoiseResult adv_noise_train(std::span<const Image> fakes, std::span<const Image> reals,
                               std::span<const DetectorHandle> classifiers,
                               std::span<const Plane> masks, const AdvNoiseConfig& cfg);

enum class MaskStyle { Full, Eroded, Feathered };

/// Toy analogues of the three face-mask variants.
Plane make_blend_mask(const Plane& face, MaskStyle style);

struct FilterConfig {
  bool enabled = true;
  double spatial_sigma = metrics::kDefaultSpatialSigma;
  double range_sigma = metrics::kDefaultRangeSigma;
};

/// mask * bilateral(fake) + (1 - mask) * target
Image blend_postprocess(const Image& fake, const Image& target, const Plane& mask,
                        const FilterConfig& filter = {});

struct AugmentResult {
  Image image;
  // The deformed mask had no weight anywhere, so the output is just the
  // background and should not be labelled fake.
  bool degenerate_mask = false;
};

/// Feathered alpha blend of the fake face onto a real background with a
/// seeded elastic deformation of the mask boundary.
AugmentResult blend_augment(const Image& fake_fg, const Image& real_bg, const Plane& mask,
                            std::uint64_t seed);

/// Fakeness from (p_real, p_fake, p_adversarial): 1 - p_real.
double aggregate_multiclass(double p0, double p1, double p2);

}  // namespace dfgc::agents
