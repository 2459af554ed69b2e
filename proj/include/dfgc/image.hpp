#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dfgc {

/// Interleaved RGB raster with intensities in [0,1].
///
/// Values are held as doubles so that white-box detectors can be
/// differentiated; PNG I/O quantizes to 8 bits per channel.
class Image {
 public:
  static constexpr int kChannels = 3;
  static constexpr int kMinSide = 8;

  Image() = default;
  /// Throws ErrorKind::Parameter if either side is below kMinSide.
  Image(int width, int height, double fill = 0.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int x, int y, int c) const noexcept {
    return data_[index(x, y, c)];
  }
  double& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }

  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// BT.601 luma plane, row-major.
  std::vector<double> luma() const;

  /// Clamps every sample to [0,1] in place.
  void clamp01() noexcept;

  /// Rounds every sample to the nearest multiple of 1/255.
  void quantize8() noexcept;

  /// Raw 8-bit RGB bytes (quantized copy).
  std::vector<std::uint8_t> to_bytes() const;

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Single-channel [0,1] plane; used for masks and luma.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  double& at(int x, int y) noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Decodes a PNG to RGB. Alpha is dropped, grayscale replicated, 16-bit
/// samples truncated to their high byte.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Grayscale mask I/O (255 = full weight).
Plane read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Plane& mask);

/// Raw file bytes.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace dfgc
