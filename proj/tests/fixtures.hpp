#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dfgc/image.hpp"

namespace fixtures {

/// Smooth test image: sum of a few low-frequency cosines per channel, kept
/// inside [0.2, 0.8] so injected noise rarely clips.
dfgc::Image smooth_image(int w, int h, std::uint64_t seed);

/// Horizontal+vertical linear ramp.
dfgc::Image gradient_image(int w, int h);

dfgc::Image constant_image(int w, int h, double value);

/// Adds N(0, sigma^2) to every channel (same draw across channels so that
/// luma noise has the injected sigma), clamps, optionally quantizes.
dfgc::Image add_noise(const dfgc::Image& img, double sigma, std::uint64_t seed,
                      bool quantize = false);

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
