#include "dfgc/identity.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "dfgc/digest.hpp"
#include "dfgc/error.hpp"

namespace dfgc::identity {

namespace {
constexpr double kZeroNorm = 1e-12;
}

EmbeddingVector EmbeddingVector::from_values(std::vector<double> values) {
  EmbeddingVector v;
  v.values = std::move(values);
  v.norm = std::sqrt(std::inner_product(v.values.begin(), v.values.end(), v.values.begin(), 0.0));
  v.degenerate = v.norm < kZeroNorm;
  return v;
}

EmbeddingVector toy_embed(const Image& img) {
  auto feat = downsample_luma(img, kToyGrid);
  const double mean = std::accumulate(feat.begin(), feat.end(), 0.0) / feat.size();
  for (double& f : feat) f -= mean;
  const double norm = std::sqrt(std::inner_product(feat.begin(), feat.end(), feat.begin(), 0.0));
  EmbeddingVector out;
  if (norm < kZeroNorm) {
    out.values.assign(feat.size(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (double& f : feat) f /= norm;
  return EmbeddingVector::from_values(std::move(feat));
}

IdentityReference id_reference(std::span<const EmbeddingVector> embeddings,
                               const std::string& person_id) {
  if (embeddings.empty()) throw Error(ErrorKind::Parameter, "id_reference: no reference images");
  const std::size_t dim = embeddings.front().dimension();
  std::vector<double> sum(dim, 0.0);
  for (const auto& e : embeddings) {
    if (e.dimension() != dim) throw Error(ErrorKind::Shape, "id_reference: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) sum[i] += e.values[i];
  }
  for (double& s : sum) s /= static_cast<double>(embeddings.size());
  return IdentityReference{person_id, EmbeddingVector::from_values(std::move(sum)),
                           embeddings.size()};
}

IdentityReference id_reference(std::span<const Image> images, const std::string& person_id,
                               const EmbeddingProvider& provider) {
  std::vector<EmbeddingVector> embeddings;
  embeddings.reserve(images.size());
  for (const auto& img : images) embeddings.push_back(provider.embed(img));
  return id_reference(embeddings, person_id);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b, bool* degenerate) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorKind::Shape, "cosine: dimension mismatch " + std::to_string(a.dimension()) +
                                      " vs " + std::to_string(b.dimension()));
  }
  const bool zero = a.degenerate || b.degenerate || a.norm < kZeroNorm || b.norm < kZeroNorm;
  if (degenerate) *degenerate = zero;
  if (zero) return 0.0;
  const double dot = std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
  return std::clamp(dot / (a.norm * b.norm), -1.0, 1.0);
}

Similarity id_similarity(const Image& fake, const IdentityReference& ref,
                         const EmbeddingProvider& provider) {
  if (provider.dimension() != ref.mean_embedding.dimension()) {
    throw Error(ErrorKind::Shape, "id_similarity: provider/reference dimension mismatch");
  }
  Similarity s;
  s.value = cosine(provider.embed(fake), ref.mean_embedding, &s.degenerate);
  return s;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "sidecar I/O assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw Error(ErrorKind::Decode, "truncated sidecar header: " + path.string());
  }
  return v;
}

}  // namespace

void write_sidecar(const std::filesystem::path& path, std::span<const EmbeddingVector> vectors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const std::uint32_t dim = vectors.empty() ? 0 : static_cast<std::uint32_t>(vectors[0].dimension());
  put_u32(out, dim);
  put_u32(out, static_cast<std::uint32_t>(vectors.size()));
  for (const auto& v : vectors) {
    if (v.dimension() != dim) throw Error(ErrorKind::Shape, "write_sidecar: ragged vectors");
    for (double d : v.values) {
      const float f = static_cast<float>(d);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
}

std::vector<EmbeddingVector> read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const std::uint32_t dim = get_u32(in, path);
  const std::uint32_t count = get_u32(in, path);
  std::vector<EmbeddingVector> out;
  out.reserve(count);
  std::vector<float> buf(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)))) {
      throw Error(ErrorKind::Decode, "truncated sidecar body: " + path.string());
    }
    out.push_back(EmbeddingVector::from_values(std::vector<double>(buf.begin(), buf.end())));
  }
  return out;
}

void SidecarProvider::add(const Image& img, EmbeddingVector vec) {
  if (vec.dimension() != dimension_) throw Error(ErrorKind::Shape, "sidecar: dimension mismatch");
  table_[sha256_hex(img.to_bytes())] = std::move(vec);
}

EmbeddingVector SidecarProvider::embed(const Image& img) const {
  const auto it = table_.find(sha256_hex(img.to_bytes()));
  if (it == table_.end()) throw Error(ErrorKind::NotFound, "sidecar: no embedding for image");
  return it->second;
}

}  // namespace dfgc::identity
