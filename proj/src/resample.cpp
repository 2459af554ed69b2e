#include "dfgc/resample.hpp"

#include <algorithm>
#include <cmath>

namespace dfgc {

std::vector<std::array<Tap, 2>> bilinear_taps(int src, int dst) {
  std::vector<std::array<Tap, 2>> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, src - 1);
    const double t = pos - lo;
    taps[i] = {Tap{lo, 1.0 - t}, Tap{hi, t}};
  }
  return taps;
}

std::vector<double> downsample_luma(const Image& img, int grid) {
  const auto luma = img.luma();
  const auto tx = bilinear_taps(img.width(), grid);
  const auto ty = bilinear_taps(img.height(), grid);
  std::vector<double> out(static_cast<std::size_t>(grid) * grid);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      double acc = 0.0;
      for (const Tap& a : ty[gy]) {
        for (const Tap& b : tx[gx]) {
          acc += a.weight * b.weight * luma[static_cast<std::size_t>(a.index) * img.width() + b.index];
        }
      }
      out[gy * grid + gx] = acc;
    }
  }
  return out;
}

}  // namespace dfgc
