#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dfgc/error.hpp"
#include "dfgc/protocol.hpp"
#include "dfgc/random.hpp"
#include "dfgc/rocstats.hpp"
#include "dfgc/scoring.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
namespace ag = dfgc::agents;
namespace pr = dfgc::protocol;
namespace sc = dfgc::scoring;
using dfgc::Image;

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

// Scores an image by its top-left red sample, so tests can dial in exact scores.
class PixelDetector final : public ag::Detector {
 public:
  explicit PixelDetector(std::string id = "pixel") : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  double score(const Image& img) const override {
    ++calls;
    return img.at(0, 0, 0);
  }
  nlohmann::ordered_json spec() const override { return {{"kind", "pixel"}, {"id", id_}}; }
  mutable int calls = 0;

 private:
  std::string id_;
};

// Mean luma: separates the synthetic faces from dark constant frames.
class BrightnessDetector final : public ag::Detector {
 public:
  const std::string& id() const override { return id_; }
  double score(const Image& img) const override {
    double s = 0;
    for (double v : img.luma()) s += v;
    return s;
  }
  nlohmann::ordered_json spec() const override { return {{"kind", "brightness"}}; }

 private:
  std::string id_ = "bright";
};

class NanDetector final : public ag::Detector {
 public:
  const std::string& id() const override { return id_; }
  double score(const Image& img) const override { return img.at(0, 0, 0) > 0.5 ? NAN : 0.0; }
  nlohmann::ordered_json spec() const override { return {{"kind", "nan"}}; }

 private:
  std::string id_ = "nan";
};

pr::ImageSet scored_set(const std::string& prefix, std::vector<double> scores) {
  pr::ImageSet out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Image img(8, 8);
    img.at(0, 0, 0) = scores[i];
    out.push_back({prefix + std::to_string(i) + ".png", {}, img});
  }
  return out;
}

struct World {
  fixtures::TempDir dir{"scoring"};
  pr::Dataset ds;
  dfgc::identity::ToyEmbedder embedder;

  World() {
    pr::SyntheticConfig cfg;
    cfg.n_persons = 3;
    cfg.n_frames = 4;
    cfg.image_size = 32;
    cfg.n_tasks = 8;
    cfg.n_refs_per_person = 2;
    cfg.seed = 17;
    pr::gen_synthetic(dir.path(), cfg);
    ds = pr::load_dataset(dir.path(), embedder);
  }

  fs::path copy_submission(const std::string& name, const std::string& from_dir) {
    const fs::path out = dir / ("sub_" + name);
    fs::create_directories(out);
    for (const auto& id : ds.tasks.entries) {
      const auto src = from_dir == "real" ? dir / "real" / id.target_filename() : dir / from_dir / id.filename();
      fs::copy_file(src, out / id.filename(), fs::copy_options::overwrite_existing);
    }
    return out;
  }

  pr::SubmissionManifest manifest(const fs::path& sub, const std::string& team = "t") {
    return pr::validate_submission(sub, ds.tasks, team, dfgc::PhaseId{dfgc::PhaseKind::Creation, 1});
  }
};

World& world() {
  static World w;
  return w;
}

pr::ImageSet dark_reals() {
  pr::ImageSet out;
  for (int i = 0; i < 6; ++i) {
    out.push_back({"dark" + std::to_string(i) + ".png", {}, fixtures::constant_image(32, 32, 0.01 * i)});
  }
  return out;
}

}  // namespace

TEST_CASE("detection score") {
  const PixelDetector det;
  const auto reals = scored_set("r", {0.1, 0.2, 0.3, 0.4, 0.5});

  SUBCASE("perfect separation") {
    const std::vector<sc::FakeDataset> sets{{"A", scored_set("f", {0.9, 0.8})}};
    CHECK(sc::score_detection(det, reals, sets).mean_auroc == 1.0);
  }

  SUBCASE("mean of per-dataset AUROCs") {
    const std::vector<sc::FakeDataset> sets{{"A", scored_set("a", {0.45})}, {"B", scored_set("b", {0.35})}};
    const auto s = sc::score_detection(det, reals, sets);
    CHECK(s.per_dataset.at("A").auroc == doctest::Approx(0.8));
    CHECK(s.per_dataset.at("B").auroc == doctest::Approx(0.6));
    CHECK(s.mean_auroc == doctest::Approx(0.7));
    CHECK(s.n_datasets == 2);
  }

  SUBCASE("three datasets against a pairwise oracle") {
    dfgc::Rng rng(4);
    std::vector<double> r;
    for (int i = 0; i < 30; ++i) r.push_back(std::round(rng.uniform() * 20) / 20);
    const auto real_set = scored_set("r", r);
    std::vector<sc::FakeDataset> sets;
    double expected = 0.0;
    for (const char* name : {"C", "A", "B"}) {
      std::vector<double> f;
      for (int i = 0; i < 25; ++i) f.push_back(std::round(rng.uniform(0.2, 1.0) * 20) / 20);
      double wins = 0.0;
      for (double x : f) {
        for (double y : r) wins += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
      }
      expected += wins / (f.size() * r.size());
      sets.push_back({name, scored_set(name, f)});
    }
    const auto s = sc::score_detection(det, real_set, sets);
    CHECK(s.mean_auroc == doctest::Approx(expected / 3).epsilon(1e-15));
  }

  SUBCASE("duplicating a dataset keeps a perfect score") {
    const auto fakes = scored_set("f", {0.9, 0.7});
    const std::vector<sc::FakeDataset> sets{{"A", fakes}, {"A2", fakes}};
    CHECK(sc::score_detection(det, reals, sets).mean_auroc == 1.0);
  }

  SUBCASE("real set is scored once per detector") {
    PixelDetector counting;
    sc::ScoreCache cache;
    const std::vector<sc::FakeDataset> sets{{"A", scored_set("a", {0.45})}, {"B", scored_set("b", {0.35})}};
    sc::score_detection(counting, reals, sets, &cache);
    CHECK(counting.calls == 5 + 2);
    sc::score_detection(counting, reals, sets, &cache);
    CHECK(counting.calls == 5 + 2 + 2);
  }

  SUBCASE("errors") {
    CHECK(kind_of([&] { sc::score_detection(det, reals, {}); }) == dfgc::ErrorKind::Parameter);
    const std::vector<sc::FakeDataset> empty{{"A", {}}};
    CHECK(kind_of([&] { sc::score_detection(det, reals, empty); }) == dfgc::ErrorKind::Parameter);
    const std::vector<sc::FakeDataset> sets{{"A", scored_set("bad", {0.2, 0.9})}};
    const NanDetector nan;
    try {
      sc::score_detection(nan, reals, sets);
      FAIL("expected a detector fault");
    } catch (const dfgc::Error& e) {
      CHECK(e.kind() == dfgc::ErrorKind::DetectorFault);
      CHECK(std::string(e.what()).find("bad1.png") != std::string::npos);
    }
  }
}

TEST_CASE("creation score") {
  auto& w = world();
  const auto copy = w.manifest(w.copy_submission("copy", "real"));
  const auto swap = w.manifest(w.copy_submission("swap", "baseline"));
  const auto reals = dark_reals();
  const std::vector<ag::DetectorHandle> perfect{std::make_shared<BrightnessDetector>()};
  const std::vector<ag::DetectorHandle> chance{std::make_shared<ag::ConstantDetector>("k", 0.5)};

  SUBCASE("copy-target submission") {
    const auto b = sc::score_creation(copy, w.ds.tasks, perfect, reals, w.embedder);
    CHECK(b.ssim_mean == 1.0);
    CHECK(b.anti_detection == 0.0);
    CHECK(b.per_detector.at(0).result.auroc == 1.0);
  }

  SUBCASE("no detectors and no noise term") {
    sc::CreationConfig cfg;
    cfg.noise_term_enabled = false;
    const auto b = sc::score_creation(swap, w.ds.tasks, {}, reals, w.embedder, cfg);
    CHECK(b.n_detectors_used == 0);
    CHECK(b.anti_detection == 0.0);
    CHECK(b.total == b.ssim_mean + b.id_mean);
  }

  SUBCASE("chance detector gives anti_detection 1") {
    const auto b = sc::score_creation(swap, w.ds.tasks, chance, reals, w.embedder);
    CHECK(b.anti_detection == 1.0);
    CHECK(b.total == ((b.ssim_mean + b.noise_mean) + b.id_mean) + b.anti_detection);
    CHECK(b.total >= -1.0);
    CHECK(b.total <= 5.0);
  }

  SUBCASE("detector list never changes the other terms") {
    const auto a = sc::score_creation(swap, w.ds.tasks, perfect, reals, w.embedder);
    const auto b = sc::score_creation(swap, w.ds.tasks, chance, reals, w.embedder);
    CHECK(a.ssim_mean == b.ssim_mean);
    CHECK(a.noise_mean == b.noise_mean);
    CHECK(a.id_mean == b.id_mean);
    CHECK(a.anti_detection != b.anti_detection);
  }

  SUBCASE("duplicated detector leaves anti_detection unchanged") {
    const std::vector<ag::DetectorHandle> twice{chance[0], chance[0]};
    const std::vector<ag::DetectorHandle> mixed{perfect[0], chance[0]};
    const std::vector<ag::DetectorHandle> mixed2{perfect[0], chance[0], perfect[0], chance[0]};
    CHECK(sc::score_creation(swap, w.ds.tasks, twice, reals, w.embedder).anti_detection == 1.0);
    CHECK(sc::score_creation(swap, w.ds.tasks, mixed2, reals, w.embedder).anti_detection ==
          sc::score_creation(swap, w.ds.tasks, mixed, reals, w.embedder).anti_detection);
  }

  SUBCASE("swaps resemble their source more than copies do") {
    const auto c = sc::score_creation(copy, w.ds.tasks, {}, reals, w.embedder);
    const auto s = sc::score_creation(swap, w.ds.tasks, {}, reals, w.embedder);
    CHECK(s.id_mean > c.id_mean);
    CHECK(s.ssim_mean < c.ssim_mean);
  }

  SUBCASE("terms are cached by checksum") {
    sc::ScoreCache cache;
    const auto a = sc::score_creation(swap, w.ds.tasks, chance, reals, w.embedder, {}, &cache);
    const auto b = sc::score_creation(swap, w.ds.tasks, perfect, reals, w.embedder, {}, &cache);
    CHECK(cache.term_entries() == 1);
    CHECK(a.ssim_mean == b.ssim_mean);
    sc::score_creation(copy, w.ds.tasks, chance, reals, w.embedder, {}, &cache);
    CHECK(cache.term_entries() == 2);
  }

  SUBCASE("an unreadable image aborts with its name") {
    const auto dir = w.copy_submission("broken", "baseline");
    const auto m = w.manifest(dir);
    const auto victim = w.ds.tasks.entries.at(3).filename();
    std::ofstream(dir / victim, std::ios::binary | std::ios::trunc) << "not a png";
    try {
      sc::score_creation(m, w.ds.tasks, {}, reals, w.embedder);
      FAIL("expected a decode error");
    } catch (const dfgc::Error& e) {
      CHECK(e.kind() == dfgc::ErrorKind::Decode);
      CHECK(std::string(e.what()).find(victim) != std::string::npos);
    }
  }
}

TEST_CASE("total is the exact sum of enabled terms") {
  dfgc::Rng rng(99);
  for (int run = 0; run < 100; ++run) {
    sc::CreationTerms terms{rng.uniform(-1, 1), rng.uniform(), rng.uniform(-1, 1), 10};
    sc::CreationConfig cfg;
    cfg.noise_term_enabled = rng.uniform() < 0.5;
    std::vector<sc::DetectorAuroc> dets;
    const int n = static_cast<int>(rng.uniform_int(0, 4));
    for (int i = 0; i < n; ++i) dets.push_back({"d" + std::to_string(i), {rng.uniform(), 5, 5}});
    const auto b = sc::compose_creation(terms, dets, cfg);
    double expected = b.ssim_mean;
    if (cfg.noise_term_enabled) expected += b.noise_mean;
    expected += b.id_mean;
    if (n > 0) expected += b.anti_detection;
    CHECK(b.total == expected);
    if (n == 0) CHECK(b.anti_detection == 0.0);
  }
}

TEST_CASE("rescoring") {
  auto& w = world();
  const auto reals = dark_reals();
  const std::vector<ag::DetectorHandle> chance{std::make_shared<ag::ConstantDetector>("k", 0.5)};
  const std::vector<ag::DetectorHandle> perfect{std::make_shared<BrightnessDetector>()};
  const std::vector<pr::SubmissionManifest> ms{w.manifest(w.copy_submission("r1", "baseline"), "a"),
                                               w.manifest(w.copy_submission("r2", "real"), "b")};
  sc::ScoreCache cache;
  std::vector<sc::CreationScoreBreakdown> original;
  for (const auto& m : ms) original.push_back(sc::score_creation(m, w.ds.tasks, chance, reals, w.embedder));

  const auto same = sc::rescore(ms, w.ds.tasks, chance, reals, w.embedder, {}, &cache);
  for (std::size_t i = 0; i < ms.size(); ++i) CHECK(same[i].total == original[i].total);

  const auto none = sc::rescore(ms, w.ds.tasks, {}, reals, w.embedder, {}, &cache);
  const auto stronger = sc::rescore(ms, w.ds.tasks, perfect, reals, w.embedder, {}, &cache);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(none[i].anti_detection == 0.0);
    CHECK(none[i].ssim_mean == original[i].ssim_mean);
    CHECK(none[i].noise_mean == original[i].noise_mean);
    CHECK(none[i].id_mean == original[i].id_mean);
    CHECK(original[i].total - stronger[i].total ==
          doctest::Approx(original[i].anti_detection - stronger[i].anti_detection).epsilon(1e-12));
  }

  const auto victim = ms[0].dir / w.ds.tasks.entries.front().filename();
  auto img = dfgc::read_png(victim);
  img.at(0, 0, 0) = img.at(0, 0, 0) > 0.5 ? 0.0 : 1.0;
  dfgc::write_png(victim, img);
  CHECK(kind_of([&] { sc::rescore(ms, w.ds.tasks, chance, reals, w.embedder, {}, &cache); }) ==
        dfgc::ErrorKind::Tamper);
}

TEST_CASE("score report field order") {
  sc::CreationScoreBreakdown b;
  b.per_detector = {{"z", {0.25, 1, 1}}, {"a", {0.75, 1, 1}}};
  const auto j = sc::score_report("team", dfgc::PhaseId{dfgc::PhaseKind::Creation, 2}, b);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"team", "phase", "kind", "ssim_mean", "noise_mean", "id_mean",
                                         "anti_detection", "total", "n_detectors_used", "noise_term_enabled",
                                         "per_detector_auroc", "per_dataset_auroc"});
  CHECK(j["phase"] == "C2");
  CHECK(j["per_detector_auroc"][0]["detector"] == "z");

  sc::DetectionScore d;
  d.per_dataset = {{"b", {0.5, 1, 1}}, {"a", {1.0, 1, 1}}};
  d.mean_auroc = 0.75;
  d.n_datasets = 2;
  const auto jd = sc::score_report("det", dfgc::PhaseId{dfgc::PhaseKind::Detection, 1}, d);
  CHECK(jd.dump() ==
        R"({"team":"det","phase":"D1","kind":"detection","mean_auroc":0.75,"n_datasets":2,)"
        R"("per_dataset_auroc":{"a":1.0,"b":0.5}})");
}
