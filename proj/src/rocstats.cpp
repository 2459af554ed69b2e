#include "dfgc/rocstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "dfgc/error.hpp"

namespace dfgc::stats {

ScoredSample::ScoredSample(Label label, double score) : label_(label), score_(score) {
  if (!std::isfinite(score)) {
    throw Error(ErrorKind::Parameter, "scored sample: score must be finite");
  }
}

AurocResult auroc(std::span<const ScoredSample> samples) {
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].score() < samples[b].score();
  });

  // Twice the mid-rank of each tie group is (first + last) with 1-based
  // ranks, which keeps the whole statistic in integers.
  std::uint64_t rank_sum_x2 = 0;
  std::uint64_t n_fake = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && samples[order[j]].score() == samples[order[i]].score()) ++j;
    const std::uint64_t mid_x2 = (i + 1) + j;
    for (std::size_t k = i; k < j; ++k) {
      if (samples[order[k]].label() == Label::Fake) {
        rank_sum_x2 += mid_x2;
        ++n_fake;
      }
    }
    i = j;
  }
  const std::uint64_t n_real = n - n_fake;
  if (n_fake == 0 || n_real == 0) {
    throw Error(ErrorKind::ClassMissing, "auroc: need at least one real and one fake sample");
  }
  const std::uint64_t u_x2 = rank_sum_x2 - n_fake * (n_fake + 1);
  AurocResult result;
  result.auroc = static_cast<double>(u_x2) / static_cast<double>(2 * n_fake * n_real);
  result.n_fake = n_fake;
  result.n_real = n_real;
  return result;
}

AurocResult auroc(std::span<const double> real_scores, std::span<const double> fake_scores) {
  std::vector<ScoredSample> samples;
  samples.reserve(real_scores.size() + fake_scores.size());
  for (double s : real_scores) samples.emplace_back(Label::Real, s);
  for (double s : fake_scores) samples.emplace_back(Label::Fake, s);
  return auroc(samples);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::Shape, "pearson: length mismatch " + std::to_string(x.size()) +
                                      " vs " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorKind::Parameter, "pearson: need at least 2 points");
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace dfgc::stats
