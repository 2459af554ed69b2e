#pragma once

#include <array>
#include <vector>

#include "dfgc/image.hpp"

namespace dfgc {

inline constexpr int kToyGrid = 16;

struct Tap {
  int index = 0;
  double weight = 0.0;
};

/// 1-D bilinear taps mapping `dst` centre-aligned samples onto `src` pixels.
std::vector<std::array<Tap, 2>> bilinear_taps(int src, int dst);

/// Luma plane bilinearly resampled to grid x grid, row-major.
std::vector<double> downsample_luma(const Image& img, int grid = kToyGrid);

}  // namespace dfgc
