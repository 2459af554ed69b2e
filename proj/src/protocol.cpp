#include "dfgc/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "dfgc/digest.hpp"
#include "dfgc/error.hpp"

namespace dfgc::protocol {

namespace {

std::string pad4(std::uint32_t v) {
  std::string s = std::to_string(v);
  if (s.size() < 4) s.insert(0, 4 - s.size(), '0');
  return s;
}

std::vector<std::string> split_stem(const std::string& filename) {
  if (filename.find('/') != std::string::npos) {
    throw Error(ErrorKind::Naming, "'" + filename + "' is not a basename");
  }
  constexpr std::string_view kExt = ".png";
  if (filename.size() <= kExt.size() ||
      filename.compare(filename.size() - kExt.size(), kExt.size(), kExt) != 0) {
    throw Error(ErrorKind::Naming, "'" + filename + "' does not end in .png");
  }
  const std::string stem = filename.substr(0, filename.size() - kExt.size());
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = stem.find('_', start);
    tokens.push_back(stem.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return tokens;
}

std::uint32_t parse_index(const std::string& token, const std::string& filename) {
  std::uint32_t value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const bool digits = !token.empty() && std::all_of(token.begin(), token.end(),
                                                    [](char c) { return c >= '0' && c <= '9'; });
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (!digits || ec != std::errc{} || ptr != last) {
    throw Error(ErrorKind::Naming,
                "'" + filename + "': index token '" + token + "' is not a non-negative integer");
  }
  return value;
}

void require_label(const std::string& token, const std::string& filename) {
  if (token.empty()) throw Error(ErrorKind::Naming, "'" + filename + "': empty person label");
}

}  // namespace

std::string FaceSwapId::filename() const {
  return id_t + "_" + id_s + "_" + pad4(vid_idx) + "_" + pad4(frame_idx) + ".png";
}

std::string FaceSwapId::target_filename() const {
  return RealFrameId{id_t, vid_idx, frame_idx}.filename();
}

std::string RealFrameId::filename() const {
  return person + "_" + pad4(vid_idx) + "_" + pad4(frame_idx) + ".png";
}

FaceSwapId parse_name(const std::string& filename) {
  const auto tokens = split_stem(filename);
  if (tokens.size() != 4) {
    throw Error(ErrorKind::Naming, "'" + filename + "': expected 4 underscore-separated tokens, got " +
                                       std::to_string(tokens.size()));
  }
  require_label(tokens[0], filename);
  require_label(tokens[1], filename);
  if (tokens[0] == tokens[1]) {
    throw Error(ErrorKind::Naming,
                "'" + filename + "': source token '" + tokens[1] + "' equals target token");
  }
  return FaceSwapId{tokens[0], tokens[1], parse_index(tokens[2], filename),
                    parse_index(tokens[3], filename)};
}

RealFrameId parse_real_name(const std::string& filename) {
  const auto tokens = split_stem(filename);
  if (tokens.size() != 3) {
    throw Error(ErrorKind::Naming, "'" + filename + "': expected 3 underscore-separated tokens, got " +
                                       std::to_string(tokens.size()));
  }
  require_label(tokens[0], filename);
  return RealFrameId{tokens[0], parse_index(tokens[1], filename), parse_index(tokens[2], filename)};
}

ImageSet load_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ImageSet out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back({f.filename().string(), f, read_png(f)});
  return out;
}

const Image& SwapTaskList::target(const FaceSwapId& id) const {
  const auto it = target_images.find(id);
  if (it == target_images.end()) {
    throw Error(ErrorKind::NotFound, "no target image for " + id.filename());
  }
  return it->second;
}

Plane SwapTaskList::mask(const FaceSwapId& id) const {
  if (const auto it = face_masks.find(id); it != face_masks.end()) return it->second;
  const Image& t = target(id);
  return Plane(t.width(), t.height(), 1.0);
}

std::vector<FaceSwapId> read_task_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open task list " + path.string());
  std::vector<FaceSwapId> out;
  std::set<FaceSwapId> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    FaceSwapId id = parse_name(line);
    if (!seen.insert(id).second) {
      throw Error(ErrorKind::Naming, "duplicate task entry " + id.filename());
    }
    out.push_back(std::move(id));
  }
  return out;
}

void write_task_file(const std::filesystem::path& path, const std::vector<FaceSwapId>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write task list " + path.string());
  for (const auto& e : entries) out << e.filename() << '\n';
}

Dataset load_dataset(const std::filesystem::path& root,
                     const identity::EmbeddingProvider& provider) {
  Dataset ds;
  ds.root = root;
  ds.tasks.entries = read_task_file(root / "tasks.txt");
  std::set<std::string> sources;
  for (const auto& id : ds.tasks.entries) {
    ds.tasks.target_images.emplace(id, read_png(root / "real" / id.target_filename()));
    const auto mask_path = root / "masks" / id.target_filename();
    if (std::filesystem::exists(mask_path)) ds.tasks.face_masks.emplace(id, read_mask_png(mask_path));
    sources.insert(id.id_s);
  }
  for (const auto& person : sources) {
    const auto refs = load_image_dir(root / "refs" / person);
    std::vector<Image> images;
    for (const auto& r : refs) images.push_back(r.image);
    ds.tasks.source_refs.emplace(person, identity::id_reference(images, person, provider));
  }
  ds.real_set = load_image_dir(root / "real");
  return ds;
}

std::string submission_checksum(const std::filesystem::path& dir,
                                const std::vector<FaceSwapId>& entries) {
  Sha256 h;
  for (const auto& id : entries) {
    const std::string name = id.filename();
    h.update(name);
    h.update(std::string_view("\n", 1));
    h.update(read_file_bytes(dir / name));
  }
  return h.hex();
}

SubmissionManifest validate_submission(const std::filesystem::path& dir, const SwapTaskList& tasks,
                                       const std::string& team, PhaseId phase) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::Io, "submission directory not readable: " + dir.string());
  }
  std::set<FaceSwapId> required(tasks.entries.begin(), tasks.entries.end());
  std::set<FaceSwapId> present;
  std::vector<std::string> extraneous;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file()) {
      extraneous.push_back(name);
      continue;
    }
    try {
      FaceSwapId id = parse_name(name);
      if (required.count(id) && id.filename() == name) {
        present.insert(std::move(id));
        continue;
      }
    } catch (const Error&) {
    }
    extraneous.push_back(name);
  }
  if (!extraneous.empty()) {
    std::sort(extraneous.begin(), extraneous.end());
    std::string msg = "extraneous files in submission:";
    for (const auto& n : extraneous) msg += " " + n;
    throw Error(ErrorKind::Extraneous, msg);
  }
  if (present.size() != required.size()) {
    std::string msg = "submission is missing " + std::to_string(required.size() - present.size()) +
                      " required images:";
    for (const auto& id : tasks.entries) {
      if (!present.count(id)) msg += " " + id.filename();
    }
    throw Error(ErrorKind::Coverage, msg);
  }

  SubmissionManifest m;
  m.team = team;
  m.phase = phase;
  m.dir = dir;
  for (const auto& id : tasks.entries) {
    const auto path = dir / id.filename();
    Image img;
    try {
      img = read_png(path);
    } catch (const Error& e) {
      throw Error(ErrorKind::Decode, id.filename() + ": " + e.what());
    }
    const Image& target = tasks.target(id);
    if (!img.same_shape(target)) {
      throw Error(ErrorKind::Shape,
                  id.filename() + ": size " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) + " does not match target " +
                      std::to_string(target.width()) + "x" + std::to_string(target.height()));
    }
    m.images.emplace(id, path);
  }
  m.checksum = submission_checksum(dir, tasks.entries);
  return m;
}

ImageSet load_submission(const SubmissionManifest& manifest, const std::vector<FaceSwapId>& order) {
  ImageSet out;
  out.reserve(order.size());
  for (const auto& id : order) {
    const auto it = manifest.images.find(id);
    if (it == manifest.images.end()) {
      throw Error(ErrorKind::Coverage, "manifest has no image for " + id.filename());
    }
    try {
      out.push_back({id.filename(), it->second, read_png(it->second)});
    } catch (const Error& e) {
      throw Error(e.kind(), "while scoring " + id.filename() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dfgc::protocol
