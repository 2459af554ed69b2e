#pragma once

#include <cstddef>

#include "dfgc/image.hpp"

namespace dfgc::metrics {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all valid 11x11 Gaussian windows of the luma planes.
/// Symmetric in its arguments bit-for-bit.
double ssim(const Image& a, const Image& b);

inline constexpr int kNoisePatch = 7;
inline constexpr double kDefaultSigmaRef = 25.0 / 255.0;

struct NoiseConfig {
  double sigma_ref = kDefaultSigmaRef;
  int max_iterations = 10;
  double rel_tolerance = 1e-3;
  std::size_t min_patches = 10;
};

struct NoiseEstimate {
  double sigma_hat = 0.0;
  double score = 1.0;
  std::size_t patches_used = 0;
  int iterations = 0;
  // Set when too few weak-texture patches survived and the global estimate
  // was used instead.
  bool fallback = false;
};

/// Maps an estimated sigma to the [0,1] noise score.
double noise_score(double sigma_hat, double sigma_ref = kDefaultSigmaRef);

/// Patch-PCA weak-texture noise level estimate on the luma plane.
NoiseEstimate estimate_noise(const Image& img, const NoiseConfig& cfg = {});

inline constexpr double kDefaultSpatialSigma = 2.0;
inline constexpr double kDefaultRangeSigma = 0.1;

/// Edge-preserving smoothing. The spatial kernel is truncated at
/// 2*spatial_sigma; the range kernel is applied per channel.
Image bilateral_filter(const Image& img, double spatial_sigma = kDefaultSpatialSigma,
                       double range_sigma = kDefaultRangeSigma);

}  // namespace dfgc::metrics
