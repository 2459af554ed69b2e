#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfgc/image.hpp"
#include "dfgc/resample.hpp"

namespace dfgc::identity {

struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;
  // True when the embedding collapsed to zero (e.g. a constant image).
  bool degenerate = false;

  std::size_t dimension() const noexcept { return values.size(); }

  static EmbeddingVector from_values(std::vector<double> values);
};

/// Source of identity features. Implementations must be deterministic and
/// safe to call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed(const Image& img) const = 0;
};

/// Mean-centred, L2-normalised 16x16 luma thumbnail (256 dims).
EmbeddingVector toy_embed(const Image& img);

class ToyEmbedder final : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return kToyGrid * kToyGrid; }
  EmbeddingVector embed(const Image& img) const override { return toy_embed(img); }
};

struct IdentityReference {
  std::string person_id;
  EmbeddingVector mean_embedding;
  std::size_t n_refs = 0;
};

/// Raw (unnormalised) mean of the embeddings.
IdentityReference id_reference(std::span<const EmbeddingVector> embeddings,
                               const std::string& person_id);
IdentityReference id_reference(std::span<const Image> images, const std::string& person_id,
                               const EmbeddingProvider& provider);

struct Similarity {
  double value = 0.0;
  bool degenerate = false;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b, bool* degenerate = nullptr);

Similarity id_similarity(const Image& fake, const IdentityReference& ref,
                         const EmbeddingProvider& provider);

/// Sidecar file: little-endian u32 dimension, u32 count, then count
/// vectors of little-endian float32.
void write_sidecar(const std::filesystem::path& path, std::span<const EmbeddingVector> vectors);
std::vector<EmbeddingVector> read_sidecar(const std::filesystem::path& path);

/// Provider backed by precomputed embeddings keyed by image content digest.
/// Lets externally computed features (e.g. a real face recogniser) stand in
/// for toy_embed without changing any scoring path.
class SidecarProvider final : public EmbeddingProvider {
 public:
  explicit SidecarProvider(std::size_t dimension) : dimension_(dimension) {}

  void add(const Image& img, EmbeddingVector vec);
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(const Image& img) const override;

 private:
  std::size_t dimension_;
  std::map<std::string, EmbeddingVector> table_;
};

}  // namespace dfgc::identity
