#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dfgc::stats {

enum class Label { Real, Fake };

/// A detector output. Higher scores mean "more fake"; Fake is the positive
/// class.
class ScoredSample {
 public:
  /// Throws ErrorKind::Parameter on a non-finite score.
  ScoredSample(Label label, double score);

  Label label() const noexcept { return label_; }
  double score() const noexcept { return score_; }

 private:
  Label label_;
  double score_;
};

struct AurocResult {
  double auroc = 0.5;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

/// Mann-Whitney AUROC with mid-ranks for ties.
AurocResult auroc(std::span<const ScoredSample> samples);

/// Convenience overload over separate score vectors.
AurocResult auroc(std::span<const double> real_scores, std::span<const double> fake_scores);

/// Sample Pearson correlation; nullopt when either vector is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace dfgc::stats
