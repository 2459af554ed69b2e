#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "dfgc/error.hpp"
#include "dfgc/protocol.hpp"
#include "dfgc/random.hpp"

namespace dfgc::protocol {

namespace {

enum : std::uint64_t { kTagPerson = 1, kTagVideo = 2, kTagFrame = 3, kTagTasks = 4 };

constexpr int kPatternTerms = 6;
constexpr double kSeamDepth = 0.10;
constexpr double kSeamWidth = 1.5;
constexpr double kSwapContrast = 0.9;

struct Wave {
  double fu = 0.0;
  double fv = 0.0;
  double amp = 0.0;
  double phase = 0.0;
};

struct Person {
  std::array<double, 3> skin{};
  std::array<Wave, kPatternTerms> pattern{};

  double texture(double u, double v) const {
    double acc = 0.0;
    for (const Wave& w : pattern) acc += w.amp * std::cos(std::numbers::pi * (w.fu * u + w.fv * v) + w.phase);
    return acc;
  }
};

struct Video {
  std::array<double, 3> background{};
  double grad_x = 0.0;
  double grad_y = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
};

struct Frame {
  double cx = 0.0;
  double cy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  double brightness = 0.0;
};

Person make_person(std::uint64_t seed, int p) {
  Rng rng(derive_seed({seed, kTagPerson, static_cast<std::uint64_t>(p)}));
  Person person;
  const std::array<double, 3> base{0.72, 0.56, 0.46};
  for (int c = 0; c < 3; ++c) person.skin[c] = base[c] + rng.uniform(-0.06, 0.06);
  for (Wave& w : person.pattern) {
    do {
      w.fu = rng.uniform_int(-3, 3);
      w.fv = rng.uniform_int(-3, 3);
    } while (w.fu == 0 && w.fv == 0);
    w.amp = rng.uniform(0.06, 0.10);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return person;
}

double luma_of(const std::array<double, 3>& rgb) {
  return kLumaR * rgb[0] + kLumaG * rgb[1] + kLumaB * rgb[2];
}

// Backgrounds vary freely in colour but stay within a small luma offset of
// the face so that the silhouette does not dominate luma-based features.
Video make_video(std::uint64_t seed, int p, int v, int size, const Person& person) {
  Rng rng(derive_seed({seed, kTagVideo, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(v)}));
  Video video;
  for (double& c : video.background) c = rng.uniform(0.3, 0.8);
  const double shift = luma_of(person.skin) + rng.uniform(-0.04, 0.04) - luma_of(video.background);
  for (double& c : video.background) c += shift;
  video.grad_x = rng.uniform(-0.04, 0.04);
  video.grad_y = rng.uniform(-0.04, 0.04);
  video.cx = size / 2.0 + rng.uniform(-size / 32.0, size / 32.0);
  video.cy = size / 2.0 + rng.uniform(-size / 32.0, size / 32.0);
  video.ax = size * rng.uniform(0.34, 0.37);
  video.ay = size * rng.uniform(0.41, 0.44);
  return video;
}

Frame make_frame(std::uint64_t seed, int p, int v, int f, const Video& video) {
  Rng rng(derive_seed({seed, kTagFrame, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(v),
                       static_cast<std::uint64_t>(f)}));
  Frame frame;
  frame.cx = video.cx + rng.uniform(-1.0, 1.0);
  frame.cy = video.cy + rng.uniform(-1.0, 1.0);
  frame.ax = video.ax;
  frame.ay = video.ay;
  frame.brightness = rng.uniform(-0.015, 0.015);
  return frame;
}

struct Geometry {
  double u = 0.0;
  double v = 0.0;
  double r = 0.0;
  double alpha = 0.0;
  double edge_px = 0.0;  // signed distance to the ellipse boundary, in pixels
};

Geometry locate(const Frame& frame, int x, int y) {
  Geometry g;
  g.u = (x + 0.5 - frame.cx) / frame.ax;
  g.v = (y + 0.5 - frame.cy) / frame.ay;
  g.r = std::sqrt(g.u * g.u + g.v * g.v);
  g.edge_px = (1.0 - g.r) * std::min(frame.ax, frame.ay);
  g.alpha = std::clamp(g.edge_px + 0.5, 0.0, 1.0);
  return g;
}

// Renders `identity`'s face into the pose of `frame` over `video`'s
// background. When `swapped` is set, the result carries the blending seam
// and contrast loss of the generator's face-swap pipeline.
Image render(const Video& video, const Frame& frame, const Person& skin_owner,
             const Person& identity, int size, bool swapped) {
  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Geometry g = locate(frame, x, y);
      const double gx = (x + 0.5) / size - 0.5;
      const double gy = (y + 0.5) / size - 0.5;
      double tex = identity.texture(g.u, g.v);
      double seam = 0.0;
      if (swapped) {
        tex *= kSwapContrast;
        seam = -kSeamDepth * std::exp(-(g.edge_px * g.edge_px) / (2.0 * kSeamWidth * kSeamWidth));
      }
      for (int c = 0; c < 3; ++c) {
        const double bg = video.background[c] + video.grad_x * gx * 2.0 + video.grad_y * gy * 2.0;
        const double face = skin_owner.skin[c] + tex;
        img.at(x, y, c) = g.alpha * face + (1.0 - g.alpha) * bg + frame.brightness + seam;
      }
    }
  }
  img.clamp01();
  img.quantize8();
  return img;
}

Plane render_mask(const Frame& frame, int size) {
  Plane mask(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) mask.at(x, y) = locate(frame, x, y).alpha;
  }
  return mask;
}

std::string person_label(int p) { return "id" + std::to_string(p); }

}  // namespace

void gen_synthetic(const std::filesystem::path& root, const SyntheticConfig& cfg) {
  if (cfg.n_persons < 2) throw Error(ErrorKind::Parameter, "gen_synthetic: n_persons must be >= 2");
  if (cfg.image_size < 32) throw Error(ErrorKind::Parameter, "gen_synthetic: image_size must be >= 32");
  if (cfg.n_videos_per_person < 1 || cfg.n_frames < 1 || cfg.n_refs_per_person < 1) {
    throw Error(ErrorKind::Parameter, "gen_synthetic: counts must be positive");
  }
  const int n_real = cfg.n_persons * cfg.n_videos_per_person * cfg.n_frames;
  if (cfg.n_tasks < 1 || cfg.n_tasks > n_real * (cfg.n_persons - 1)) {
    throw Error(ErrorKind::Parameter, "gen_synthetic: n_tasks must be in [1, " +
                                          std::to_string(n_real * (cfg.n_persons - 1)) + "]");
  }
  namespace fs = std::filesystem;
  for (const char* sub : {"real", "masks", "refs", "baseline"}) {
    fs::remove_all(root / sub);
    fs::create_directories(root / sub);
  }
  fs::remove(root / "tasks.txt");

  std::vector<Person> persons;
  for (int p = 0; p < cfg.n_persons; ++p) persons.push_back(make_person(cfg.seed, p));

  struct Target {
    int person;
    int video;
    int frame;
  };
  std::vector<Target> frames;
  for (int p = 0; p < cfg.n_persons; ++p) {
    for (int v = 0; v < cfg.n_videos_per_person; ++v) {
      const Video video = make_video(cfg.seed, p, v, cfg.image_size, persons[p]);
      for (int f = 0; f < cfg.n_frames; ++f) {
        const Frame frame = make_frame(cfg.seed, p, v, f, video);
        const RealFrameId id{person_label(p), static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(f)};
        write_png(root / "real" / id.filename(),
                  render(video, frame, persons[p], persons[p], cfg.image_size, false));
        write_mask_png(root / "masks" / id.filename(), render_mask(frame, cfg.image_size));
        frames.push_back({p, v, f});
      }
    }
    // References come from a held-out video of the same person.
    const int ref_video = cfg.n_videos_per_person;
    const Video video = make_video(cfg.seed, p, ref_video, cfg.image_size, persons[p]);
    fs::create_directories(root / "refs" / person_label(p));
    for (int k = 0; k < cfg.n_refs_per_person; ++k) {
      const Frame frame = make_frame(cfg.seed, p, ref_video, k, video);
      const RealFrameId id{person_label(p), static_cast<std::uint32_t>(ref_video), static_cast<std::uint32_t>(k)};
      write_png(root / "refs" / person_label(p) / id.filename(),
                render(video, frame, persons[p], persons[p], cfg.image_size, false));
    }
  }

  Rng rng(derive_seed({cfg.seed, kTagTasks}));
  std::vector<int> frame_offset(frames.size());
  for (int& o : frame_offset) o = rng.uniform_int(0, cfg.n_persons - 2);
  std::vector<FaceSwapId> tasks;
  for (int k = 0; k < cfg.n_tasks; ++k) {
    const std::size_t fi = static_cast<std::size_t>(k) % frames.size();
    const int lap = k / static_cast<int>(frames.size());
    const Target& t = frames[fi];
    const int source = (t.person + 1 + (frame_offset[fi] + lap) % (cfg.n_persons - 1)) % cfg.n_persons;
    FaceSwapId id{person_label(t.person), person_label(source), static_cast<std::uint32_t>(t.video),
                  static_cast<std::uint32_t>(t.frame)};
    const Video video = make_video(cfg.seed, t.person, t.video, cfg.image_size, persons[t.person]);
    const Frame frame = make_frame(cfg.seed, t.person, t.video, t.frame, video);
    write_png(root / "baseline" / id.filename(),
              render(video, frame, persons[t.person], persons[source], cfg.image_size, true));
    tasks.push_back(std::move(id));
  }
  write_task_file(root / "tasks.txt", tasks);
}

}  // namespace dfgc::protocol
