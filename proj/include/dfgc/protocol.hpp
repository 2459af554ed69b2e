#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dfgc/identity.hpp"
#include "dfgc/image.hpp"
#include "dfgc/phase.hpp"

namespace dfgc::protocol {

/// Target/source/video/frame quadruple naming one required face swap.
struct FaceSwapId {
  std::string id_t;
  std::string id_s;
  std::uint32_t vid_idx = 0;
  std::uint32_t frame_idx = 0;

  auto operator<=>(const FaceSwapId&) const = default;

  /// "idT_idS_vidIdx_frameIdx.png" with 4-digit zero padding.
  std::string filename() const;
  /// Name of the target frame this swap is built on.
  std::string target_filename() const;
};

/// A real frame, "idT_vidIdx_frameIdx.png".
struct RealFrameId {
  std::string person;
  std::uint32_t vid_idx = 0;
  std::uint32_t frame_idx = 0;

  auto operator<=>(const RealFrameId&) const = default;
  std::string filename() const;
};

/// Throws ErrorKind::Naming naming the offending token.
FaceSwapId parse_name(const std::string& filename);
RealFrameId parse_real_name(const std::string& filename);

struct NamedImage {
  std::string name;
  std::filesystem::path path;
  Image image;
};

using ImageSet = std::vector<NamedImage>;

/// Loads every *.png in a directory, sorted by filename.
ImageSet load_image_dir(const std::filesystem::path& dir);

struct SwapTaskList {
  std::vector<FaceSwapId> entries;
  std::map<FaceSwapId, Image> target_images;
  std::map<FaceSwapId, Plane> face_masks;
  std::map<std::string, identity::IdentityReference> source_refs;

  std::size_t size() const noexcept { return entries.size(); }
  const Image& target(const FaceSwapId& id) const;
  /// Face mask when the dataset provides one, else an all-ones mask.
  Plane mask(const FaceSwapId& id) const;
};

/// One canonical fake filename per line.
std::vector<FaceSwapId> read_task_file(const std::filesystem::path& path);
void write_task_file(const std::filesystem::path& path, const std::vector<FaceSwapId>& entries);

/// Everything a game needs from an on-disk dataset root.
struct Dataset {
  std::filesystem::path root;
  SwapTaskList tasks;
  ImageSet real_set;
};

/// Loads tasks.txt, real/, masks/ and refs/ below `root`, building identity
/// references with `provider`.
Dataset load_dataset(const std::filesystem::path& root,
                     const identity::EmbeddingProvider& provider);

struct SubmissionManifest {
  std::string team;
  PhaseId phase;
  std::filesystem::path dir;
  std::map<FaceSwapId, std::filesystem::path> images;
  std::string checksum;

  std::size_t size() const noexcept { return images.size(); }
};

/// Digest over the image file bytes in task-list order.
std::string submission_checksum(const std::filesystem::path& dir,
                                const std::vector<FaceSwapId>& entries);

/// Checks exact coverage, decodability and per-image dimensions.
SubmissionManifest validate_submission(const std::filesystem::path& dir, const SwapTaskList& tasks,
                                       const std::string& team = "", PhaseId phase = {});

/// Loads a validated submission's images in task-list order.
ImageSet load_submission(const SubmissionManifest& manifest, const std::vector<FaceSwapId>& order);

struct SyntheticConfig {
  int n_persons = 5;
  int n_videos_per_person = 2;
  int n_frames = 10;
  int image_size = 64;
  int n_tasks = 100;
  int n_refs_per_person = 4;
  std::uint64_t seed = 1;
};

/// Renders a desk-scale face-swap dataset below `root`:
///   real/      idT_vidIdx_frameIdx.png
///   masks/     face masks for every real frame (same names)
///   refs/<p>/  reference frames per person
///   baseline/  the generator's own face swaps for every task
///   tasks.txt  required swaps
/// Output bytes depend only on the config.
void gen_synthetic(const std::filesystem::path& root, const SyntheticConfig& cfg);

}  // namespace dfgc::protocol
