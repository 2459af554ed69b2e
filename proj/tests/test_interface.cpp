#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"

#include "dfgc/cli.hpp"
#include "dfgc/error.hpp"
#include "dfgc/service.hpp"
#include "dfgc/store.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
namespace pr = dfgc::protocol;
namespace gm = dfgc::game;
using dfgc::ErrorKind;
using dfgc::PhaseId;
using dfgc::PhaseKind;
using nlohmann::ordered_json;

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

constexpr PhaseId C1{PhaseKind::Creation, 1};

struct World {
  fixtures::TempDir dir{"iface"};
  dfgc::identity::ToyEmbedder embedder;
  fs::path data = dir / "data";
  fs::path swaps;
  gm::GameConfig cfg;

  World() {
    pr::SyntheticConfig c;
    c.n_persons = 3;
    c.n_frames = 4;
    c.image_size = 32;
    c.n_tasks = 8;
    c.n_refs_per_person = 2;
    c.seed = 5;
    pr::gen_synthetic(data, c);
    swaps = data / "baseline";
    cfg = gm::GameConfig::from_json({{"rounds", 2}});
    cfg.dataset = data;
    cfg.training = data;
    cfg.seed_detectors.push_back({{"kind", "hash"}, {"id", "seed"}, {"salt", 9}});
  }

  fs::path write_config() const {
    const auto p = dir / "game.json";
    std::ofstream(p) << cfg.to_json().dump(2);
    return p;
  }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dfgc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dfgc::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("event log and snapshot files") {
  fixtures::TempDir dir("store");
  const dfgc::store::StateStore s(dir.path());
  CHECK(s.read_events().empty());
  CHECK(s.read_snapshot().is_null());

  s.append_event({{"tick", 1}, {"kind", "a"}});
  s.append_event({{"tick", 2}, {"kind", "b"}});
  {
    std::ofstream torn(s.events_path(), std::ios::app);
    torn << R"({"tick": 3, "ki)";
  }
  const auto events = s.read_events();
  REQUIRE(events.size() == 2);
  CHECK(events[1]["kind"] == "b");
  // The torn tail is cut so the next append starts a fresh line.
  s.append_event({{"tick", 3}, {"kind", "c"}});
  CHECK(s.read_events().size() == 3);

  s.write_snapshot({{"x", 1}});
  s.write_snapshot({{"x", 2}});
  CHECK(s.read_snapshot()["x"] == 2);
  CHECK_FALSE(fs::exists(dir / "snapshot.json.tmp"));

  {
    std::ofstream bad(s.events_path(), std::ios::app);
    bad << "not json\n";
  }
  CHECK(kind_of([&] { s.read_events(); }) == ErrorKind::State);

  setenv("DFGC_STORE", "/tmp/from-env", 1);
  CHECK(dfgc::store::store_root("fallback") == fs::path("/tmp/from-env"));
  unsetenv("DFGC_STORE");
  CHECK(dfgc::store::store_root("fallback") == fs::path("fallback"));
}

TEST_CASE("session persistence and recovery") {
  World w;
  const auto root = w.dir / "store";
  CHECK(kind_of([&] { dfgc::store::Session(root, nullptr, w.embedder); }) == ErrorKind::NotFound);

  ordered_json before_submit, after;
  std::string sub_id;
  {
    dfgc::store::Session s(root, &w.cfg, w.embedder);
    CHECK(s.open_info().replayed_events == 0);
    before_submit = s.store().read_snapshot();
    const auto rec = s.submit_creation("a", C1, w.swaps);
    sub_id = rec.id;
    CHECK(kind_of([&] { s.submit_detection("b", C1, {{"kind", "constant"}}); }) == ErrorKind::Phase);
    after = s.store().read_snapshot();
    CHECK(after.dump() == s.published()->dump());
    CHECK(after["submissions"].size() == 1);
  }
  {
    dfgc::store::Session s(root, nullptr, w.embedder);
    CHECK(s.open_info().replayed_events == 2);
    CHECK(s.open_info().snapshot_matched);
    CHECK(s.published()->dump() == after.dump());
  }
  // A crash between the log append and the snapshot write leaves a stale
  // snapshot; reopening replays the log and repairs it.
  dfgc::store::StateStore(root).write_snapshot(before_submit);
  {
    dfgc::store::Session s(root, nullptr, w.embedder);
    CHECK_FALSE(s.open_info().snapshot_matched);
    CHECK(s.store().read_snapshot().dump() == after.dump());
    CHECK(s.with_game([&](const gm::Game& g) { return g.submission(sub_id).team; }) == "a");
    CHECK(s.with_game([](const gm::Game& g) { return g.audit().size(); }) == 0);
  }
  // A half-evaluated submission leaves at most an orphaned archive directory,
  // which the next submission with that id replaces.
  fs::create_directories(root / "submissions" / "sub-3");
  std::ofstream(root / "submissions" / "sub-3" / "junk.png") << "x";
  {
    dfgc::store::Session s(root, nullptr, w.embedder);
    CHECK(s.open_info().snapshot_matched);
    const auto rec = s.submit_creation("b", C1, w.swaps);
    CHECK(rec.id == "sub-3");
    CHECK_FALSE(fs::exists(root / "submissions" / "sub-3" / "junk.png"));
  }
}

TEST_CASE("http status mapping") {
  using dfgc::service::http_status;
  CHECK(http_status(ErrorKind::Parameter) == 400);
  CHECK(http_status(ErrorKind::Phase) == 403);
  CHECK(http_status(ErrorKind::Quota) == 403);
  CHECK(http_status(ErrorKind::NoCounterparty) == 403);
  CHECK(http_status(ErrorKind::NotFound) == 404);
  CHECK(http_status(ErrorKind::Frozen) == 409);
  CHECK(http_status(ErrorKind::State) == 409);
  CHECK(http_status(ErrorKind::Coverage) == 422);
  CHECK(http_status(ErrorKind::Naming) == 422);
  CHECK(http_status(ErrorKind::Decode) == 422);
}

namespace {

ordered_json wait_done(httplib::Client& c, const std::string& job, int* status = nullptr) {
  for (int i = 0; i < 600; ++i) {
    const auto r = c.Get("/v1/submissions/" + job);
    REQUIRE(r);
    auto j = ordered_json::parse(r->body);
    if (j["status"] == "done" || j["status"] == "failed") {
      if (status) *status = r->status;
      return j;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  FAIL("job did not finish");
  return {};
}

}  // namespace

TEST_CASE("service endpoints") {
  World w;
  dfgc::store::Session session(w.dir / "store", &w.cfg, w.embedder);
  dfgc::service::Service svc(session);
  const int port = svc.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread server([&] { svc.listen(); });
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(60, 0);

  auto post = [&](const std::string& path, const ordered_json& body) {
    const auto r = c.Post(path, body.dump(), "application/json");
    REQUIRE(r);
    return std::make_pair(r->status, ordered_json::parse(r->body));
  };

  // Malformed requests.
  {
    const auto r = c.Post("/v1/submissions", "{nope", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(post("/v1/submissions", {{"team", "a"}}).first == 400);
    CHECK(post("/v1/submissions", {{"team", "a"}, {"phase", "X9"}, {"kind", "creation"}}).first == 400);
    CHECK(c.Get("/v1/leaderboard/Q1")->status == 400);
    CHECK(c.Get("/v1/leaderboard/C7")->status == 404);
    CHECK(c.Get("/v1/submissions/job-999")->status == 404);
  }

  // Accepted creation submission matches the CLI and the library.
  const auto [st, queued] =
      post("/v1/submissions", {{"team", "a"}, {"phase", "C1"}, {"kind", "creation"}, {"path", w.swaps.string()}});
  CHECK(st == 202);
  CHECK(queued["status"] == "queued");
  const auto done = wait_done(c, queued["job"]);
  REQUIRE(done["status"] == "done");
  const auto cli_out = cli({"score-creation", w.swaps.string(), "--data", w.data.string(), "--team", "a", "--phase",
                            "C1", "--detector", R"({"kind": "hash", "id": "seed", "salt": 9})", "--json"});
  REQUIRE(cli_out.code == 0);
  CHECK(ordered_json::parse(cli_out.out).dump() == done["report"].dump());
  const auto by_id = ordered_json::parse(c.Get("/v1/submissions/" + done["id"].get<std::string>())->body);
  CHECK(by_id["report"].dump() == done["report"].dump());

  // Validation failure, wrong phase kind.
  fs::create_directories(w.dir / "empty");
  int code = 0;
  auto failed = wait_done(
      c, post("/v1/submissions", {{"team", "a"}, {"phase", "C1"}, {"kind", "creation"}, {"path", (w.dir / "empty").string()}})
             .second["job"],
      &code);
  CHECK(code == 422);
  CHECK(failed["error"]["kind"] == "coverage");
  wait_done(c,
            post("/v1/submissions", {{"team", "d"}, {"phase", "C1"}, {"kind", "detection"}, {"detector", {{"kind", "constant"}}}})
                .second["job"],
            &code);
  CHECK(code == 403);

  // Leaderboard, advance, frozen phase.
  post("/v1/submissions", {{"team", "b"}, {"phase", "C1"}, {"kind", "creation"}, {"path", (w.data / "baseline").string()}});
  const auto adv = post("/v1/admin/advance", ordered_json::object());
  CHECK(adv.first == 200);
  CHECK(adv.second["kind"] == "advance");
  const auto lb = ordered_json::parse(c.Get("/v1/leaderboard/C1")->body);
  CHECK(lb["frozen"] == true);
  REQUIRE(lb["entries"].size() == 2);
  CHECK(lb["entries"][0]["score"].get<double>() >= lb["entries"][1]["score"].get<double>());
  wait_done(c,
            post("/v1/submissions", {{"team", "a"}, {"phase", "C1"}, {"kind", "creation"}, {"path", w.swaps.string()}})
                .second["job"],
            &code);
  CHECK(code == 409);

  // Detection submission by spec.
  const auto det = wait_done(
      c, post("/v1/submissions", {{"team", "d"}, {"phase", "D1"}, {"kind", "detection"}, {"detector", {{"kind", "constant"}}}})
             .second["job"]);
  CHECK(det["report"]["mean_auroc"] == 0.5);
  CHECK(det["report"]["n_datasets"] == 2);

  CHECK(c.Get("/v1/final")->status == 409);
  for (int i = 0; i < 3; ++i) CHECK(post("/v1/admin/advance", ordered_json::object()).first == 200);
  CHECK(post("/v1/admin/advance", ordered_json::object()).first == 409);
  CHECK(c.Get("/v1/final")->status == 200);
  CHECK(ordered_json::parse(c.Get("/v1/state")->body)["final"] == true);

  svc.stop();
  server.join();
}

TEST_CASE("command line") {
  World w;
  CHECK(cli({}).code == 2);
  CHECK(cli({"no-such-verb"}).code == 2);
  CHECK(cli({"validate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  const auto ok = cli({"validate", w.swaps.string(), "--data", w.data.string(), "--json"});
  CHECK(ok.code == 0);
  CHECK(ordered_json::parse(ok.out)["n_images"] == 8);
  const auto bad = cli({"validate", (w.dir / "missing").string(), "--data", w.data.string(), "--json"});
  CHECK(bad.code == 1);
  CHECK(ordered_json::parse(bad.out).contains("error"));

  {
    std::ofstream tsv(w.dir / "s.tsv");
    tsv << "real\t0.1\nfake\t0.9\nreal\t0.5\nfake\t0.5\n";
  }
  const auto au = cli({"auroc", (w.dir / "s.tsv").string(), "--json"});
  CHECK(au.code == 0);
  CHECK(ordered_json::parse(au.out)["auroc"] == 0.875);
  {
    std::ofstream tsv(w.dir / "bad.tsv");
    tsv << "maybe\t0.1\n";
  }
  CHECK(cli({"auroc", (w.dir / "bad.tsv").string()}).code == 1);

  // Noise term follows the phase unless overridden.
  auto noise = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"score-creation", w.swaps.string(), "--data", w.data.string(), "--json"};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = cli(args);
    REQUIRE(r.code == 0);
    return ordered_json::parse(r.out)["noise_term_enabled"].get<bool>();
  };
  CHECK_FALSE(noise({}));
  CHECK(noise({"--phase", "C2"}));
  CHECK_FALSE(noise({"--phase", "C2", "--noise", "off"}));

  // Same config and seed twice: identical transcripts.
  const auto cfg = w.write_config();
  {
    std::ofstream sc(w.dir / "scenario.json");
    sc << R"({"creators": [{"kind": "copy", "id": "c"}], "detectors": [{"kind": "constant", "id": "k"}]})";
  }
  auto run = [&](const std::string& work) {
    const auto r = cli({"run-game", "--config", cfg.string(), "--seed", "7", "--scenario",
                        (w.dir / "scenario.json").string(), "--work", (w.dir / work).string(), "--json"});
    REQUIRE(r.code == 0);
    return ordered_json::parse(r.out)["transcript_digest"].get<std::string>();
  };
  CHECK(run("w1") == run("w2"));
}
