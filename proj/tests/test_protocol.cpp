#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "doctest.h"
#include "dfgc/digest.hpp"
#include "dfgc/error.hpp"
#include "dfgc/imgmetrics.hpp"
#include "dfgc/protocol.hpp"
#include "dfgc/random.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
namespace pr = dfgc::protocol;

namespace {

dfgc::ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const dfgc::Error& e) {
    return e.kind();
  }
  FAIL("expected dfgc::Error");
  return dfgc::ErrorKind::Io;
}

pr::SyntheticConfig small_config() {
  pr::SyntheticConfig cfg;
  cfg.n_persons = 3;
  cfg.n_videos_per_person = 2;
  cfg.n_frames = 3;
  cfg.image_size = 32;
  cfg.n_tasks = 12;
  cfg.n_refs_per_person = 2;
  cfg.seed = 5;
  return cfg;
}

std::map<std::string, std::string> tree_digest(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), root).string()] = dfgc::sha256_hex(dfgc::read_file_bytes(e.path()));
    }
  }
  return out;
}

void copy_dir(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

}  // namespace

TEST_CASE("parse_name") {
  const auto id = pr::parse_name("id3_id7_0002_0041.png");
  CHECK(id.id_t == "id3");
  CHECK(id.id_s == "id7");
  CHECK(id.vid_idx == 2);
  CHECK(id.frame_idx == 41);
  CHECK(pr::parse_name("id3_id7_2_41.png").filename() == "id3_id7_0002_0041.png");
  CHECK(kind_of([] { pr::parse_name("id3_0002_0041.png"); }) == dfgc::ErrorKind::Naming);
  CHECK(kind_of([] { pr::parse_name("id3_id3_0002_0041.png"); }) == dfgc::ErrorKind::Naming);
  CHECK(kind_of([] { pr::parse_name("id3_id7_00x2_0041.png"); }) == dfgc::ErrorKind::Naming);
  CHECK(kind_of([] { pr::parse_name("id3_id7_-2_0041.png"); }) == dfgc::ErrorKind::Naming);
  CHECK(kind_of([] { pr::parse_name("id3_id7_0002_0041.jpg"); }) == dfgc::ErrorKind::Naming);
  try {
    pr::parse_name("id3_id7_00x2_0041.png");
  } catch (const dfgc::Error& e) {
    CHECK(std::string(e.what()).find("00x2") != std::string::npos);
  }
  const auto real = pr::parse_real_name("id4_0001_0009.png");
  CHECK(real.person == "id4");
  CHECK(real.filename() == "id4_0001_0009.png");
}

TEST_CASE("canonical names round-trip") {
  dfgc::Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    pr::FaceSwapId id{"p" + std::to_string(rng.uniform_int(0, 50)),
                      "q" + std::to_string(rng.uniform_int(0, 50)),
                      static_cast<std::uint32_t>(rng.uniform_int(0, 20000)),
                      static_cast<std::uint32_t>(rng.uniform_int(0, 20000))};
    const std::string name = id.filename();
    CHECK(pr::parse_name(name) == id);
    CHECK(pr::parse_name(name).filename() == name);
  }
}

TEST_CASE("synthetic dataset is deterministic") {
  fixtures::TempDir a("gen_a"), b("gen_b");
  pr::gen_synthetic(a.path(), small_config());
  pr::gen_synthetic(b.path(), small_config());
  const auto da = tree_digest(a.path());
  CHECK(da.size() > 20);
  CHECK(da == tree_digest(b.path()));
  CHECK(pr::read_task_file(a / "tasks.txt").size() == 12);
  CHECK(kind_of([&] {
          auto cfg = small_config();
          cfg.n_persons = 1;
          pr::gen_synthetic(a.path(), cfg);
        }) == dfgc::ErrorKind::Parameter);
}

TEST_CASE("synthetic identities are separable by the toy embedder") {
  fixtures::TempDir root("gen_id");
  auto cfg = small_config();
  cfg.n_persons = 4;
  cfg.image_size = 64;
  pr::gen_synthetic(root.path(), cfg);
  const auto reals = pr::load_image_dir(root / "real");
  std::vector<std::pair<std::string, dfgc::identity::EmbeddingVector>> emb;
  for (const auto& r : reals) {
    emb.emplace_back(pr::parse_real_name(r.name).person, dfgc::identity::toy_embed(r.image));
  }
  double same = 0.0, cross = 0.0;
  int n_same = 0, n_cross = 0;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      const double c = dfgc::identity::cosine(emb[i].second, emb[j].second);
      if (emb[i].first == emb[j].first) {
        same += c;
        ++n_same;
      } else {
        cross += c;
        ++n_cross;
      }
    }
  }
  CHECK(same / n_same > cross / n_cross);

  // Baseline swaps carry the source identity: nearly all are closer to the
  // source reference than to the target person's own reference.
  dfgc::identity::ToyEmbedder provider;
  const auto ds = pr::load_dataset(root.path(), provider);
  std::map<std::string, dfgc::identity::IdentityReference> all_refs;
  for (int p = 0; p < cfg.n_persons; ++p) {
    const std::string person = "id" + std::to_string(p);
    std::vector<dfgc::Image> imgs;
    for (const auto& r : pr::load_image_dir(root / "refs" / person)) imgs.push_back(r.image);
    all_refs.emplace(person, dfgc::identity::id_reference(imgs, person, provider));
  }
  int closer = 0;
  for (const auto& id : ds.tasks.entries) {
    const auto fake = dfgc::read_png(root / "baseline" / id.filename());
    closer += dfgc::identity::id_similarity(fake, all_refs.at(id.id_s), provider).value >
              dfgc::identity::id_similarity(fake, all_refs.at(id.id_t), provider).value;
  }
  CHECK(closer >= static_cast<int>(0.95 * ds.tasks.size()));
}

TEST_CASE("validate_submission") {
  fixtures::TempDir root("val");
  pr::gen_synthetic(root.path(), small_config());
  dfgc::identity::ToyEmbedder provider;
  const auto ds = pr::load_dataset(root.path(), provider);
  const fs::path sub = root / "fake" / "teamA";
  copy_dir(root / "baseline", sub);

  const auto m = pr::validate_submission(sub, ds.tasks, "teamA", dfgc::PhaseId{});
  CHECK(m.size() == ds.tasks.size());
  CHECK(m.checksum == pr::validate_submission(sub, ds.tasks).checksum);
  CHECK(m.checksum == pr::submission_checksum(sub, ds.tasks.entries));

  SUBCASE("checksum ignores directory order") {
    const fs::path other = root / "fake" / "teamB";
    fs::create_directories(other);
    // Copy files in reverse order so directory listings differ.
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(sub)) files.push_back(e.path());
    std::sort(files.rbegin(), files.rend());
    for (const auto& f : files) fs::copy_file(f, other / f.filename());
    CHECK(pr::validate_submission(other, ds.tasks).checksum == m.checksum);
  }
  SUBCASE("missing file") {
    const auto victim = ds.tasks.entries[3];
    fs::remove(sub / victim.filename());
    try {
      pr::validate_submission(sub, ds.tasks);
      FAIL("expected coverage error");
    } catch (const dfgc::Error& e) {
      CHECK(e.kind() == dfgc::ErrorKind::Coverage);
      CHECK(std::string(e.what()).find(victim.filename()) != std::string::npos);
    }
  }
  SUBCASE("extra file") {
    fs::copy_file(sub / ds.tasks.entries[0].filename(), sub / "id9_id8_0000_0000.png");
    CHECK(kind_of([&] { pr::validate_submission(sub, ds.tasks); }) == dfgc::ErrorKind::Extraneous);
  }
  SUBCASE("resized image") {
    const auto victim = ds.tasks.entries[5];
    dfgc::write_png(sub / victim.filename(), dfgc::Image(16, 16, 0.5));
    try {
      pr::validate_submission(sub, ds.tasks);
      FAIL("expected shape error");
    } catch (const dfgc::Error& e) {
      CHECK(e.kind() == dfgc::ErrorKind::Shape);
      const std::string msg = e.what();
      CHECK(msg.find(victim.filename()) != std::string::npos);
      CHECK(msg.find("16x16") != std::string::npos);
      CHECK(msg.find("32x32") != std::string::npos);
    }
  }
  SUBCASE("undecodable image") {
    std::ofstream(sub / ds.tasks.entries[1].filename(), std::ios::trunc) << "not a png";
    CHECK(kind_of([&] { pr::validate_submission(sub, ds.tasks); }) == dfgc::ErrorKind::Decode);
  }
}

TEST_CASE("copy-target submission has perfect ssim") {
  fixtures::TempDir root("copy");
  pr::gen_synthetic(root.path(), small_config());
  dfgc::identity::ToyEmbedder provider;
  const auto ds = pr::load_dataset(root.path(), provider);
  for (const auto& id : ds.tasks.entries) {
    const auto fake = dfgc::read_png(root / "real" / id.target_filename());
    CHECK(dfgc::metrics::ssim(fake, ds.tasks.target(id)) == 1.0);
  }
}
