#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <unistd.h>

#include "dfgc/random.hpp"

namespace fixtures {

dfgc::Image smooth_image(int w, int h, std::uint64_t seed) {
  dfgc::Rng rng(dfgc::derive_seed({seed, 0xF1}));
  struct Term {
    double fx, fy, amp, phase;
  };
  Term terms[3][3];
  for (auto& channel : terms) {
    for (auto& t : channel) {
      t = {rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5), rng.uniform(0.03, 0.09),
           rng.uniform(0.0, 2.0 * std::numbers::pi)};
    }
  }
  dfgc::Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = 0.5;
        for (const auto& t : terms[c]) {
          v += t.amp * std::cos(2.0 * std::numbers::pi * (t.fx * x / w + t.fy * y / h) + t.phase);
        }
        img.at(x, y, c) = v;
      }
    }
  }
  return img;
}

dfgc::Image gradient_image(int w, int h) {
  dfgc::Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = 0.2 + 0.3 * x / (w - 1) + 0.3 * y / (h - 1);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  }
  return img;
}

dfgc::Image constant_image(int w, int h, double value) { return dfgc::Image(w, h, value); }

dfgc::Image add_noise(const dfgc::Image& img, double sigma, std::uint64_t seed, bool quantize) {
  dfgc::Rng rng(dfgc::derive_seed({seed, 0xA0}));
  dfgc::Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double n = sigma * rng.normal();
      for (int c = 0; c < 3; ++c) out.at(x, y, c) += n;
    }
  }
  out.clamp01();
  if (quantize) out.quantize8();
  return out;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("dfgc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace fixtures
