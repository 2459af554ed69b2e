#include "dfgc/cli.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "dfgc/error.hpp"
#include "dfgc/game.hpp"
#include "dfgc/rocstats.hpp"
#include "dfgc/service.hpp"
#include "dfgc/store.hpp"

namespace dfgc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json read_json_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') return ordered_json::parse(arg);
  std::ifstream in(arg);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + arg);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parameter, "malformed JSON in " + arg + ": " + e.what());
  }
}

std::vector<agents::DetectorHandle> load_detectors(const std::vector<std::string>& args) {
  std::vector<agents::DetectorHandle> out;
  for (const auto& a : args) out.push_back(agents::make_detector(read_json_arg(a)));
  return out;
}

// "name=dir" or "dir" (named after the directory).
std::vector<scoring::FakeDataset> load_fake_sets(const std::vector<std::string>& args) {
  std::vector<scoring::FakeDataset> out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    const fs::path dir = eq == std::string::npos ? a : a.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(a).filename().string() : a.substr(0, eq);
    out.push_back({name, protocol::load_image_dir(dir)});
  }
  return out;
}

struct Printer {
  std::ostream& out;
  bool json;

  void operator()(const ordered_json& j, const std::string& text) const {
    if (json) {
      out << j.dump(2) << '\n';
    } else {
      out << text;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

std::string creation_text(const ordered_json& r) {
  std::ostringstream ss;
  ss << "ssim_mean       " << fmt(r["ssim_mean"]) << '\n'
     << "noise_mean      " << fmt(r["noise_mean"]) << (r["noise_term_enabled"] ? "" : "  (not counted)") << '\n'
     << "id_mean         " << fmt(r["id_mean"]) << '\n'
     << "anti_detection  " << fmt(r["anti_detection"]) << "  (" << r["n_detectors_used"].get<int>()
     << " detectors)\n";
  for (const auto& d : r["per_detector_auroc"]) {
    ss << "  " << d["detector"].get<std::string>() << "  auroc " << fmt(d["auroc"]) << '\n';
  }
  ss << "total           " << fmt(r["total"]) << '\n';
  return ss.str();
}

std::string detection_text(const ordered_json& r) {
  std::ostringstream ss;
  for (auto it = r["per_dataset_auroc"].begin(); it != r["per_dataset_auroc"].end(); ++it) {
    ss << it.key() << "  auroc " << fmt(it.value()) << '\n';
  }
  ss << "mean_auroc  " << fmt(r["mean_auroc"]) << "  over " << r["n_datasets"].get<int>() << " datasets\n";
  return ss.str();
}

std::vector<double> parse_eps_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    const auto slash = tok.find('/');
    out.push_back(slash == std::string::npos ? std::stod(tok)
                                             : std::stod(tok.substr(0, slash)) / std::stod(tok.substr(slash + 1)));
  }
  return out;
}

volatile std::sig_atomic_t g_signalled = 0;

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"DeepFake creation/detection game harness", "dfgc"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "Machine-readable output");
  app.fallthrough();
  std::function<void()> action;
  auto print = [&](const ordered_json& j, const std::string& text) { Printer{out, json}(j, text); };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic face-swap dataset");
  protocol::SyntheticConfig gen_cfg;
  std::string gen_out;
  gen->add_option("out", gen_out, "Output directory")->required();
  gen->add_option("--persons", gen_cfg.n_persons)->capture_default_str();
  gen->add_option("--videos", gen_cfg.n_videos_per_person)->capture_default_str();
  gen->add_option("--frames", gen_cfg.n_frames)->capture_default_str();
  gen->add_option("--size", gen_cfg.image_size)->capture_default_str();
  gen->add_option("--tasks", gen_cfg.n_tasks)->capture_default_str();
  gen->add_option("--refs", gen_cfg.n_refs_per_person)->capture_default_str();
  gen->add_option("--seed", gen_cfg.seed)->capture_default_str();
  gen->callback([&] {
    action = [&] {
      protocol::gen_synthetic(gen_out, gen_cfg);
      print({{"root", gen_out}, {"n_tasks", gen_cfg.n_tasks}}, "wrote " + gen_out + "\n");
    };
  });

  // validate
  auto* val = app.add_subcommand("validate", "Check a creation submission against a dataset's task list");
  std::string val_dir, data_root;
  val->add_option("dir", val_dir, "Submission directory")->required();
  val->add_option("--data", data_root, "Dataset root")->required();
  val->callback([&] {
    action = [&] {
      identity::ToyEmbedder emb;
      const auto ds = protocol::load_dataset(data_root, emb);
      const auto m = protocol::validate_submission(val_dir, ds.tasks);
      print({{"valid", true}, {"n_images", m.size()}, {"checksum", m.checksum}},
            "ok: " + std::to_string(m.size()) + " images, checksum " + m.checksum + "\n");
    };
  });

  // score-creation
  auto* sc = app.add_subcommand("score-creation", "Score a creation submission");
  std::string sc_dir, sc_team = "cli", sc_phase = "C1", sc_noise = "auto", sc_config;
  std::vector<std::string> sc_detectors;
  double sc_anti = 2.0, sc_sigma = metrics::kDefaultSigmaRef;
  sc->add_option("dir", sc_dir, "Submission directory")->required();
  sc->add_option("--data", data_root, "Dataset root")->required();
  sc->add_option("--detector", sc_detectors, "Detector spec (file or inline JSON); repeatable");
  sc->add_option("--team", sc_team)->capture_default_str();
  sc->add_option("--phase", sc_phase)->capture_default_str();
  sc->add_option("--noise", sc_noise, "Noise term: on, off or auto (from the phase)")
      ->check(CLI::IsMember({"on", "off", "auto"}))
      ->capture_default_str();
  sc->add_option("--anti-coeff", sc_anti)->capture_default_str();
  sc->add_option("--sigma-ref", sc_sigma)->capture_default_str();
  sc->add_option("--config", sc_config, "Game config supplying anti_coeff, sigma_ref and noise phases");
  sc->callback([&] {
    action = [&] {
      identity::ToyEmbedder emb;
      const auto phase = PhaseId::parse(sc_phase);
      game::GameConfig gc;
      if (!sc_config.empty()) {
        gc = game::load_game_config(sc_config);
      } else {
        gc.anti_coeff = sc_anti;
        gc.sigma_ref = sc_sigma;
      }
      scoring::CreationConfig cfg;
      cfg.anti_coeff = gc.anti_coeff;
      cfg.sigma_ref = gc.sigma_ref;
      cfg.noise_term_enabled = sc_noise == "auto" ? gc.noise_term(phase) : sc_noise == "on";
      const auto ds = protocol::load_dataset(data_root, emb);
      const auto m = protocol::validate_submission(sc_dir, ds.tasks, sc_team, phase);
      const auto dets = load_detectors(sc_detectors);
      const auto b = scoring::score_creation(m, ds.tasks, dets, ds.real_set, emb, cfg);
      const auto r = scoring::score_report(sc_team, phase, b);
      print(r, creation_text(r));
    };
  });

  // score-detection
  auto* sd = app.add_subcommand("score-detection", "Score a detector over fake datasets");
  std::string sd_detector, sd_team = "cli", sd_phase = "D1";
  std::vector<std::string> fakes;
  sd->add_option("--detector", sd_detector, "Detector spec (file or inline JSON)")->required();
  sd->add_option("--data", data_root, "Dataset root (real frames)")->required();
  sd->add_option("--fakes", fakes, "Fake dataset directory, optionally name=dir; repeatable")->required();
  sd->add_option("--team", sd_team)->capture_default_str();
  sd->add_option("--phase", sd_phase)->capture_default_str();
  sd->callback([&] {
    action = [&] {
      const auto det = agents::make_detector(read_json_arg(sd_detector));
      const auto reals = protocol::load_image_dir(fs::path(data_root) / "real");
      const auto s = scoring::score_detection(*det, reals, load_fake_sets(fakes));
      const auto r = scoring::score_report(sd_team, PhaseId::parse(sd_phase), s);
      print(r, detection_text(r));
    };
  });

  // auroc
  auto* au = app.add_subcommand("auroc", "AUROC of a label<TAB>score file");
  std::string au_file;
  au->add_option("file", au_file, "TSV with label in {real, fake}")->required();
  au->callback([&] {
    action = [&] {
      std::ifstream in(au_file);
      if (!in) throw Error(ErrorKind::NotFound, "cannot open " + au_file);
      std::vector<stats::ScoredSample> samples;
      std::string line;
      for (int n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        const std::string label = line.substr(0, tab);
        if (tab == std::string::npos || (label != "real" && label != "fake")) {
          throw Error(ErrorKind::Parameter, au_file + ":" + std::to_string(n) + ": expected real|fake<TAB>score");
        }
        double v = 0.0;
        try {
          v = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
          throw Error(ErrorKind::Parameter, au_file + ":" + std::to_string(n) + ": bad score");
        }
        samples.emplace_back(label == "fake" ? stats::Label::Fake : stats::Label::Real, v);
      }
      const auto r = stats::auroc(samples);
      print({{"auroc", r.auroc}, {"n_real", r.n_real}, {"n_fake", r.n_fake}},
            "auroc " + fmt(r.auroc) + " (" + std::to_string(r.n_real) + " real, " + std::to_string(r.n_fake) +
                " fake)\n");
    };
  });

  // run-game
  auto* rg = app.add_subcommand("run-game", "Run a scripted game simulation");
  std::string rg_config, rg_scenario, rg_work = "dfgc-sim", rg_transcript;
  std::optional<std::uint64_t> rg_seed;
  rg->add_option("--config", rg_config, "Game config (JSON)")->required();
  rg->add_option("--seed", rg_seed, "Override the config seed");
  rg->add_option("--scenario", rg_scenario, "Scenario JSON (default: the canned scenario)");
  rg->add_option("--work", rg_work, "Working directory")->capture_default_str();
  rg->add_option("--transcript", rg_transcript, "Write the JSON-lines transcript here");
  rg->callback([&] {
    action = [&] {
      auto cfg = game::load_game_config(rg_config);
      if (rg_seed) cfg.seed = *rg_seed;
      const auto scenario =
          rg_scenario.empty() ? game::canned_scenario() : game::scenario_from_json(read_json_arg(rg_scenario));
      identity::ToyEmbedder emb;
      const auto res = game::run_simulation(scenario, cfg, rg_work, emb);
      if (!rg_transcript.empty()) {
        std::ofstream t(rg_transcript, std::ios::binary);
        t << res.transcript;
        if (!t) throw Error(ErrorKind::Io, "cannot write " + rg_transcript);
      }
      ordered_json j;
      j["transcript_digest"] = res.transcript_digest;
      auto lbs = ordered_json::object();
      std::ostringstream text;
      for (const auto& [phase, entries] : res.leaderboards) {
        auto arr = ordered_json::array();
        text << phase.label() << ':';
        for (const auto& e : entries) {
          arr.push_back({{"team", e.team}, {"score", e.score}});
          text << "  " << e.team << ' ' << fmt(e.score);
        }
        text << '\n';
        lbs[phase.label()] = arr;
      }
      j["leaderboards"] = lbs;
      j["final"] = res.final.to_json();
      text << "final detection:";
      for (const auto& e : res.final.detection) text << "  " << e.team << ' ' << fmt(e.score);
      text << "\nfinal creation:";
      for (const auto& e : res.final.creation) text << "  " << e.team << ' ' << fmt(e.score);
      text << "\ntranscript digest " << res.transcript_digest << '\n';
      print(j, text.str());
    };
  });

  // cross-eval
  auto* ce = app.add_subcommand("cross-eval", "AUROC matrix and dataset correlations");
  std::vector<std::string> ce_detectors;
  ce->add_option("--detector", ce_detectors, "Detector spec; repeatable")->required();
  ce->add_option("--data", data_root, "Dataset root (real frames)")->required();
  ce->add_option("--fakes", fakes, "Fake dataset directory, optionally name=dir; repeatable")->required();
  ce->callback([&] {
    action = [&] {
      const auto dets = load_detectors(ce_detectors);
      const auto sets = load_fake_sets(fakes);
      const auto reals = protocol::load_image_dir(fs::path(data_root) / "real");
      const auto r = game::cross_eval(dets, sets, reals);
      std::ostringstream text;
      text << "detector";
      for (const auto& d : r.datasets) text << '\t' << d;
      text << '\n';
      for (std::size_t i = 0; i < r.detectors.size(); ++i) {
        text << r.detectors[i];
        for (double v : r.auroc[i]) text << '\t' << fmt(v);
        text << '\n';
      }
      for (const auto& c : r.correlations) {
        text << "r(" << c.a << ", " << c.b << ") = " << (c.r ? fmt(*c.r) : std::string("undefined")) << '\n';
      }
      print(r.to_json(), text.str());
    };
  });

  // train-detector
  auto* td = app.add_subcommand("train-detector", "Train a logistic toy detector and write its spec");
  std::string td_out, td_id = "logistic", td_eps;
  agents::LogisticDetectorAgent::Config td_cfg;
  std::uint64_t td_seed = 1;
  td->add_option("--data", data_root, "Training dataset root")->required();
  td->add_option("--out", td_out, "Spec output file")->required();
  td->add_option("--id", td_id)->capture_default_str();
  td->add_option("--lr", td_cfg.train.lr)->capture_default_str();
  td->add_option("--iters", td_cfg.train.iters)->capture_default_str();
  td->add_option("--seed", td_seed)->capture_default_str();
  td->add_option("--augment-eps", td_eps, "Comma-separated FGSM eps values (e.g. 4/255,8/255)");
  td->callback([&] {
    action = [&] {
      td_cfg.augment_eps = parse_eps_list(td_eps);
      const auto training = agents::load_training_set(data_root);
      const agents::LogisticDetectorAgent agent(td_id, td_cfg);
      const auto det = agent.build({PhaseId{PhaseKind::Detection, 1}, &training, td_seed});
      const auto spec = det->spec();
      std::ofstream f(td_out);
      f << spec.dump(2) << '\n';
      if (!f) throw Error(ErrorKind::Io, "cannot write " + td_out);
      print({{"id", td_id}, {"out", td_out}}, "wrote " + td_out + "\n");
    };
  });

  // attack
  auto* at = app.add_subcommand("attack", "FGSM-attack a directory of swaps against a white-box detector");
  std::string at_detector, at_in, at_out;
  double at_eps = agents::kDefaultEps;
  bool at_face = false, at_blend = false;
  at->add_option("--detector", at_detector, "White-box detector spec")->required();
  at->add_option("--in", at_in, "Input directory of canonical swap PNGs")->required();
  at->add_option("--out", at_out, "Output directory")->required();
  at->add_option("--eps", at_eps)->capture_default_str();
  at->add_option("--data", data_root, "Dataset root (needed for --face-only and --blend)");
  at->add_flag("--face-only", at_face, "Restrict the perturbation to the face mask");
  at->add_flag("--blend", at_blend, "Bilateral-filter the face and blend it into the target frame");
  at->callback([&] {
    action = [&] {
      if ((at_face || at_blend) && data_root.empty()) {
        throw Error(ErrorKind::Parameter, "--face-only and --blend need --data");
      }
      const auto det = agents::make_detector(read_json_arg(at_detector));
      identity::ToyEmbedder emb;
      std::optional<protocol::Dataset> ds;
      if (!data_root.empty()) ds = protocol::load_dataset(data_root, emb);
      fs::create_directories(at_out);
      std::size_t n = 0;
      for (const auto& item : protocol::load_image_dir(at_in)) {
        std::optional<Plane> mask;
        std::optional<protocol::FaceSwapId> id;
        if (ds) {
          id = protocol::parse_name(item.name);
          mask = ds->tasks.mask(*id);
        }
        Image img = agents::fgsm_attack(item.image, *det, at_eps, at_face ? &*mask : nullptr);
        if (at_blend) {
          img.quantize8();
          img = agents::blend_postprocess(img, ds->tasks.target(*id),
                                          agents::make_blend_mask(*mask, agents::MaskStyle::Feathered));
        }
        write_png(fs::path(at_out) / item.name, img);
        ++n;
      }
      print({{"out", at_out}, {"n_images", n}, {"eps", at_eps}},
            "attacked " + std::to_string(n) + " images into " + at_out + "\n");
    };
  });

  // serve
  auto* sv = app.add_subcommand("serve", "Run the HTTP submission service");
  std::string sv_store, sv_config, sv_host = "127.0.0.1", sv_port_file;
  int sv_port = 8080;
  sv->add_option("--store", sv_store, "Store root (default $DFGC_STORE or ./dfgc-store)");
  sv->add_option("--config", sv_config, "Game config for a new store");
  sv->add_option("--host", sv_host)->capture_default_str();
  sv->add_option("--port", sv_port, "Port, 0 for any free port")->capture_default_str();
  sv->add_option("--port-file", sv_port_file, "Write the bound port here once listening");
  sv->callback([&] {
    action = [&] {
      const fs::path root = sv_store.empty() ? store::store_root("dfgc-store") : fs::path(sv_store);
      std::optional<game::GameConfig> cfg;
      if (!sv_config.empty()) cfg = game::load_game_config(sv_config);
      identity::ToyEmbedder emb;
      store::Session session(root, cfg ? &*cfg : nullptr, emb);
      service::Service svc(session);
      const int port = svc.bind(sv_host, sv_port);
      err << "store " << root.string() << ": replayed " << session.open_info().replayed_events << " events"
          << (session.open_info().snapshot_matched ? "" : ", snapshot rewritten") << '\n';
      err << "listening on " << sv_host << ':' << port << std::endl;
      if (!sv_port_file.empty()) {
        const auto tmp = sv_port_file + ".tmp";
        std::ofstream(tmp) << port << '\n';
        fs::rename(tmp, sv_port_file);
      }
      g_signalled = 0;
      auto on_signal = [](int) { g_signalled = 1; };
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::thread watcher([&] {
        while (!g_signalled) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        svc.stop();
      });
      svc.listen();
      g_signalled = 1;
      watcher.join();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 2;
  }
  try {
    action();
  } catch (const Error& e) {
    if (json) {
      out << ordered_json{{"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}}.dump(2)
          << '\n';
    }
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dfgc::cli
