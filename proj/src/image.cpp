#include "dfgc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

#include "dfgc/error.hpp"

namespace dfgc {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < kMinSide || height < kMinSide) {
    throw Error(ErrorKind::Parameter, "image sides must be >= " + std::to_string(kMinSide) +
                                          ", got " + std::to_string(width) + "x" +
                                          std::to_string(height));
  }
  data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

std::vector<double> Image::luma() const {
  std::vector<double> out(static_cast<std::size_t>(width_) * height_);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* p = &data_[i * kChannels];
    out[i] = kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2];
  }
  return out;
}

void Image::clamp01() noexcept {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

void Image::quantize8() noexcept {
  for (double& v : data_) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

std::vector<std::uint8_t> Image::to_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(data_[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return f;
}

// Decodes to 8-bit rows with the requested channel count (1 or 3).
std::vector<std::uint8_t> decode(const std::filesystem::path& path, bool want_gray, int& w,
                                 int& h) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorKind::Decode, "not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Decode, "libpng init failed");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Decode, "corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_gray && !is_gray) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  } else if (!want_gray && is_gray) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  const std::size_t channels = want_gray ? 1 : 3;
  if (rowbytes != static_cast<std::size_t>(w) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Decode, "unexpected PNG layout: " + path.string());
  }
  pixels.resize(rowbytes * static_cast<std::size_t>(h));
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

void encode(const std::filesystem::path& path, const std::uint8_t* pixels, int w, int h,
            bool gray) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels, 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::Io, "cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  const auto pixels = decode(path, false, w, h);
  if (w < Image::kMinSide || h < Image::kMinSide) {
    throw Error(ErrorKind::Decode, "image too small: " + path.string());
  }
  Image img(w, h);
  auto data = img.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) data[i] = pixels[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = img.to_bytes();
  encode(path, bytes.data(), img.width(), img.height(), false);
}

Plane read_mask_png(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  const auto pixels = decode(path, true, w, h);
  Plane mask(w, h);
  for (std::size_t i = 0; i < pixels.size(); ++i) mask.values[i] = pixels[i] / 255.0;
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const Plane& mask) {
  std::vector<std::uint8_t> bytes(mask.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(mask.values[i], 0.0, 1.0) * 255.0));
  }
  encode(path, bytes.data(), mask.width, mask.height, true);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dfgc
