#include "dfgc/imgmetrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "dfgc/error.hpp"

namespace dfgc::metrics {

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> taps{};
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable "valid" correlation of a plane with the SSIM window.
std::vector<double> window_filter(const std::vector<double>& plane, int w, int h,
                                  const std::array<double, kSsimWindow>& taps) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::Shape, "ssim: dimension mismatch " + std::to_string(a.width()) + "x" +
                                      std::to_string(a.height()) + " vs " +
                                      std::to_string(b.width()) + "x" +
                                      std::to_string(b.height()));
  }
  const int w = a.width();
  const int h = a.height();
  if (w < kSsimWindow || h < kSsimWindow) {
    throw Error(ErrorKind::DegenerateInput, "ssim: image smaller than the 11x11 window");
  }
  static const auto taps = gaussian_taps();
  const auto la = a.luma();
  const auto lb = b.luma();
  std::vector<double> aa(la.size()), bb(la.size()), ab(la.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    aa[i] = la[i] * la[i];
    bb[i] = lb[i] * lb[i];
    ab[i] = la[i] * lb[i];
  }
  const auto mu_a = window_filter(la, w, h, taps);
  const auto mu_b = window_filter(lb, w, h, taps);
  const auto e_aa = window_filter(aa, w, h, taps);
  const auto e_bb = window_filter(bb, w, h, taps);
  const auto e_ab = window_filter(ab, w, h, taps);

  // Every expression below is written so that swapping a and b permutes
  // only the operands of commutative operations.
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double mab = mu_a[i] * mu_b[i];
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mab;
    const double num = (2.0 * mab + kSsimC1) * (2.0 * cov + kSsimC2);
    const double den =
        (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (var_a + var_b + kSsimC2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

double noise_score(double sigma_hat, double sigma_ref) {
  return std::clamp(1.0 - sigma_hat / sigma_ref, 0.0, 1.0);
}

namespace {

constexpr int kPatchDim = kNoisePatch * kNoisePatch;

// Upper 0.99 quantile of chi2(d)/d for d = kPatchDim - 1, via the normal
// approximation.
double weak_texture_factor() {
  const double dof = kPatchDim - 1;
  return 1.0 + 2.326 * std::sqrt(2.0 / dof);
}

double smallest_eigenvalue(const std::vector<double>& patches, const std::vector<std::size_t>& ids) {
  Eigen::Matrix<double, kPatchDim, 1> mean = Eigen::Matrix<double, kPatchDim, 1>::Zero();
  for (std::size_t id : ids) {
    mean += Eigen::Map<const Eigen::Matrix<double, kPatchDim, 1>>(&patches[id * kPatchDim]);
  }
  mean /= static_cast<double>(ids.size());
  Eigen::Matrix<double, kPatchDim, kPatchDim> cov =
      Eigen::Matrix<double, kPatchDim, kPatchDim>::Zero();
  for (std::size_t id : ids) {
    const Eigen::Matrix<double, kPatchDim, 1> d =
        Eigen::Map<const Eigen::Matrix<double, kPatchDim, 1>>(&patches[id * kPatchDim]) - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  cov /= static_cast<double>(ids.size() > 1 ? ids.size() - 1 : 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kPatchDim, kPatchDim>> solver(
      cov, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues()(0));
}

}  // namespace

NoiseEstimate estimate_noise(const Image& img, const NoiseConfig& cfg) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 * kNoisePatch || h < 3 * kNoisePatch) {
    throw Error(ErrorKind::DegenerateInput,
                "estimate_noise: image must be at least 3x the 7x7 patch size");
  }
  if (!(cfg.sigma_ref > 0.0)) throw Error(ErrorKind::Parameter, "sigma_ref must be > 0");

  const auto luma = img.luma();
  const int pw = w - kNoisePatch + 1;
  const int ph = h - kNoisePatch + 1;
  const std::size_t n = static_cast<std::size_t>(pw) * ph;
  std::vector<double> patches(n * kPatchDim);
  std::vector<double> variance(n);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      const std::size_t id = static_cast<std::size_t>(y) * pw + x;
      double* dst = &patches[id * kPatchDim];
      double sum = 0.0;
      for (int dy = 0; dy < kNoisePatch; ++dy) {
        for (int dx = 0; dx < kNoisePatch; ++dx) {
          const double v = luma[(y + dy) * w + x + dx];
          dst[dy * kNoisePatch + dx] = v;
          sum += v;
        }
      }
      const double mean = sum / kPatchDim;
      double ss = 0.0;
      for (int k = 0; k < kPatchDim; ++k) ss += (dst[k] - mean) * (dst[k] - mean);
      variance[id] = ss / (kPatchDim - 1);
    }
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double global_var = smallest_eigenvalue(patches, all);

  NoiseEstimate est;
  double sigma2 = global_var;
  std::size_t used = n;
  const double factor = weak_texture_factor();
  std::vector<std::size_t> kept;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const double threshold = sigma2 * factor;
    kept.clear();
    for (std::size_t id = 0; id < n; ++id) {
      if (variance[id] < threshold) kept.push_back(id);
    }
    est.iterations = it + 1;
    if (kept.size() < cfg.min_patches) {
      est.fallback = true;
      sigma2 = global_var;
      used = n;
      break;
    }
    const double next = smallest_eigenvalue(patches, kept);
    used = kept.size();
    const double change = std::abs(next - sigma2) / std::max(sigma2, 1e-300);
    sigma2 = next;
    if (change < cfg.rel_tolerance) break;
  }
  est.sigma_hat = std::sqrt(sigma2);
  est.patches_used = used;
  est.score = noise_score(est.sigma_hat, cfg.sigma_ref);
  return est;
}

Image bilateral_filter(const Image& img, double spatial_sigma, double range_sigma) {
  if (!(spatial_sigma > 0.0) || !(range_sigma > 0.0)) {
    throw Error(ErrorKind::Parameter, "bilateral_filter: sigmas must be positive");
  }
  const int radius = static_cast<int>(std::ceil(2.0 * spatial_sigma));
  const int side = 2 * radius + 1;
  std::vector<double> spatial(static_cast<std::size_t>(side) * side);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[(dy + radius) * side + dx + radius] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * spatial_sigma * spatial_sigma));
    }
  }
  const double range_coeff = -1.0 / (2.0 * range_sigma * range_sigma);
  const int w = img.width();
  const int h = img.height();
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const double center = img.at(x, y, c);
        double acc = 0.0;
        double norm = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            const double v = img.at(xx, yy, c);
            const double diff = v - center;
            const double wgt =
                spatial[(dy + radius) * side + dx + radius] * std::exp(range_coeff * diff * diff);
            acc += wgt * v;
            norm += wgt;
          }
        }
        out.at(x, y, c) = std::clamp(acc / norm, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace dfgc::metrics
