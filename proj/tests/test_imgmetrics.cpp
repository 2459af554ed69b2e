#include <cmath>
#include <vector>

#include "doctest.h"
#include "dfgc/error.hpp"
#include "dfgc/imgmetrics.hpp"
#include "fixtures.hpp"

using dfgc::Image;
namespace m = dfgc::metrics;

namespace {

// Direct (non-separable) truncated Gaussian convolution with the same border
// rule as the filter: out-of-image taps are skipped and weights renormalised.
Image gaussian_blur_oracle(const Image& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0, norm = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= img.width() || yy >= img.height()) continue;
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            acc += w * img.at(xx, yy, c);
            norm += w;
          }
        }
        out.at(x, y, c) = acc / norm;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("ssim identity and symmetry") {
  const Image a = fixtures::smooth_image(48, 40, 3);
  const Image b = fixtures::add_noise(a, 0.05, 4);
  CHECK(m::ssim(a, a) == 1.0);
  CHECK(m::ssim(a, b) == m::ssim(b, a));
  CHECK(m::ssim(a, b) < 1.0);
}

TEST_CASE("ssim of two constant images matches the closed form") {
  const Image x = fixtures::constant_image(32, 32, 0.5);
  const Image y = fixtures::constant_image(32, 32, 0.25);
  const double expected = (2 * 0.5 * 0.25 + 1e-4) / (0.5 * 0.5 + 0.25 * 0.25 + 1e-4);
  CHECK(expected == doctest::Approx(0.80006).epsilon(1e-5));
  CHECK(std::abs(m::ssim(x, y) - expected) < 1e-9);
}

TEST_CASE("ssim decreases with stronger noise") {
  const Image x = fixtures::smooth_image(64, 64, 11);
  const double weak = m::ssim(x, fixtures::add_noise(x, 0.02, 1));
  const double strong = m::ssim(x, fixtures::add_noise(x, 0.1, 1));
  CHECK(strong < weak);
}

TEST_CASE("ssim errors") {
  CHECK_THROWS_AS(m::ssim(Image(32, 32), Image(32, 16)), dfgc::Error);
  try {
    m::ssim(Image(10, 10), Image(10, 10));
    FAIL("expected degenerate-input error");
  } catch (const dfgc::Error& e) {
    CHECK(e.kind() == dfgc::ErrorKind::DegenerateInput);
  }
}

TEST_CASE("noise estimate recovers injected sigma on a smooth image") {
  const Image base = fixtures::smooth_image(96, 96, 21);
  const auto est = m::estimate_noise(fixtures::add_noise(base, 0.05, 7));
  CHECK(est.sigma_hat >= 0.04);
  CHECK(est.sigma_hat <= 0.06);
  CHECK_FALSE(est.fallback);
  CHECK(est.score == doctest::Approx(std::clamp(1.0 - est.sigma_hat / (25.0 / 255.0), 0.0, 1.0)));
}

TEST_CASE("noiseless gradient scores near one") {
  Image g = fixtures::gradient_image(64, 64);
  g.quantize8();
  const auto est = m::estimate_noise(g);
  CHECK(est.sigma_hat <= 0.005);
  CHECK(est.score >= 0.95);
}

TEST_CASE("noise score mapping") {
  CHECK(m::noise_score(0.0) == 1.0);
  CHECK(m::noise_score(1.0) == 0.0);
  CHECK(m::noise_score(12.5 / 255.0) == doctest::Approx(0.5));
}

TEST_CASE("noise estimate is monotone in injected sigma") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Image base = fixtures::smooth_image(64, 64, 100 + seed);
    double prev = -1.0;
    for (double sigma : {0.01, 0.02, 0.05, 0.1}) {
      const double s = m::estimate_noise(fixtures::add_noise(base, sigma, seed)).sigma_hat;
      CHECK(s > prev);
      prev = s;
    }
  }
}

TEST_CASE("noise estimate rejects small images") {
  CHECK_THROWS_AS(m::estimate_noise(Image(20, 64)), dfgc::Error);
}

TEST_CASE("bilateral filter") {
  SUBCASE("constant image unchanged") {
    const Image c = fixtures::constant_image(24, 24, 0.37);
    const Image f = m::bilateral_filter(c, 2.0, 0.1);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(f.data()[i] - 0.37) < 1e-15);
  }
  SUBCASE("infinite range sigma approaches a Gaussian blur") {
    const Image img = fixtures::add_noise(fixtures::smooth_image(32, 32, 5), 0.1, 2);
    const Image f = m::bilateral_filter(img, 1.5, 1e4);
    const Image g = gaussian_blur_oracle(img, 1.5);
    double worst = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(f.data()[i] - g.data()[i]));
    CHECK(worst < 1e-3);
  }
  SUBCASE("reduces estimated noise and keeps range") {
    const Image noisy = fixtures::add_noise(fixtures::smooth_image(64, 64, 8), 0.05, 3);
    const Image f = m::bilateral_filter(noisy);
    CHECK(m::estimate_noise(f).sigma_hat < m::estimate_noise(noisy).sigma_hat);
    for (double v : f.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("deterministic") {
    const Image noisy = fixtures::add_noise(fixtures::smooth_image(32, 32, 9), 0.05, 3);
    CHECK(m::bilateral_filter(noisy) == m::bilateral_filter(noisy));
  }
  SUBCASE("rejects non-positive sigmas") {
    CHECK_THROWS_AS(m::bilateral_filter(Image(16, 16), 0.0, 0.1), dfgc::Error);
    CHECK_THROWS_AS(m::bilateral_filter(Image(16, 16), 1.0, -1.0), dfgc::Error);
  }
}
