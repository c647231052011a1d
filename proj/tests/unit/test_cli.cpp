#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"
#include "json.hpp"
#include "maskpipe/dataset_voc.hpp"
#include "maskpipe/embedder.hpp"
#include "maskpipe/pipeline.hpp"
#include "maskpipe/video.hpp"
#include "synthetic_gaussians.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = maskpipe::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "maskpipe_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path kData = MASKPIPE_TEST_DATA;

std::string snapshot_name(const std::string& path) {
  std::string name = path.empty() ? "maskpipe" : "maskpipe " + path;
  for (char& c : name) {
    if (c == ' ') c = '_';
  }
  return name + ".txt";
}

void write_gaussian_split(const fs::path& dir) {
  const auto task = oracle::make_gaussian_task(11, 8, 3, 600, 40, 2.0, 4.0, 0.5, 2);
  maskpipe::write_embeddings(dir / "train.memb", task.supports);
  maskpipe::write_embeddings(dir / "validation.memb", task.queries);
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"dataset", "stats"}).code == 1);
  CHECK(run({"dataset", "stats", "--voc", (kData / "voc").string(), "--bogus"}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"eval", "sweep", "--help"}).code == 0);
  CHECK(run({"stream", "info", "--in", "/nonexistent/x.mdvs"}).code == 2);

  const fs::path empty = scratch("empty_voc");
  const auto r = run({"dataset", "stats", "--voc", empty.string()});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("dataset stats prints histogram and ratio") {
  const auto r = run({"dataset", "stats", "--voc", (kData / "voc").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("counts: 2 / 1 / 1\n") != std::string::npos);
  CHECK(r.out.find("imbalance ratio: 2.00\n") != std::string::npos);

  const auto csv = run({"dataset", "stats", "--voc", (kData / "voc").string(), "--csv"});
  CHECK(csv.out == "class,count\nwith_mask,2\nwithout_mask,1\nmask_weared_incorrect,1\n");
}

TEST_CASE("loss check") {
  const auto r = run({"loss", "check", "--grids", "20"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("alpha=1.25 beta=1.0\n", 0) == 0);
  CHECK(r.out.find("grids: 20\n") != std::string::npos);
  CHECK(r.out.find("max relative error: ") != std::string::npos);

  const fs::path dir = scratch("loss_cfg");
  std::ofstream(dir / "heavy.cfg") << "[net]\nalpha=2.5\nbeta=1\n";
  CHECK(run({"loss", "check", "--cfg", (dir / "heavy.cfg").string()}).code == 1);
  CHECK(run({"loss", "check", "--alpha", "2", "--beta", "1.5"}).code == 1);
  CHECK(run({"loss", "check", "--cfg", (dir / "missing.cfg").string()}).code == 2);
}

TEST_CASE("config show prints learning rates") {
  const auto r = run({"config", "show", "--cfg", (kData / "config" / "detector.cfg").string(), "--at",
                      "200,4250,4600"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("lr@200=0.001\nlr@4250=1e-04\nlr@4600=1e-05\n") != std::string::npos);
  CHECK(run({"config", "show", "--cfg", (kData / "config" / "detector.cfg").string(), "--at",
             "6000"})
            .code == 1);
}

TEST_CASE("eval detections") {
  const fs::path dir = scratch("eval_detections");
  const auto annotations = maskpipe::read_voc_dir(kData / "voc");
  {
    std::ofstream pred(dir / "perfect.jsonl");
    for (const auto& a : annotations) {
      nlohmann::json line{{"image", a.filename}, {"detections", nlohmann::json::array()}};
      for (const auto& t : maskpipe::truth_boxes(a)) {
        line["detections"].push_back({{"x1", t.box.x1}, {"y1", t.box.y1}, {"x2", t.box.x2},
                                      {"y2", t.box.y2}, {"conf", 0.9}, {"class_id", t.class_id}});
      }
      pred << line.dump() << "\n";
    }
  }

  SUBCASE("perfect predictions") {
    const auto r = run({"eval", "detections", "--pred", (dir / "perfect.jsonl").string(), "--truth",
                        (kData / "voc").string(), "--out", (dir / "report").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("model      1.0000  1.0000") != std::string::npos);
    CHECK(slurp(dir / "report" / "metrics.csv") == "method,precision,f1,speed_ms_per_100\nmodel,1,1,\n");
  }
  SUBCASE("confidence threshold drops everything") {
    const auto r = run({"eval", "detections", "--pred", (dir / "perfect.jsonl").string(), "--truth",
                        (kData / "voc").string(), "--conf-thresh", "0.95"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Micro") != std::string::npos);
  }
  SUBCASE("missing truth dir") {
    CHECK(run({"eval", "detections", "--pred", (dir / "perfect.jsonl").string(), "--truth",
               (dir / "nowhere").string()})
              .code == 2);
  }
  SUBCASE("unknown image") {
    std::ofstream(dir / "stray.jsonl") << R"({"image":"stray.png","detections":[]})" << "\n";
    CHECK(run({"eval", "detections", "--pred", (dir / "stray.jsonl").string(), "--truth",
               (kData / "voc").string()})
              .code == 1);
  }
  SUBCASE("malformed line") {
    std::ofstream(dir / "bad.jsonl") << "{not json\n";
    const auto r = run({"eval", "detections", "--pred", (dir / "bad.jsonl").string(), "--truth",
                        (kData / "voc").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 1") != std::string::npos);
  }
}

TEST_CASE("eval sweep and episodic") {
  const fs::path dir = scratch("eval_fewshot");
  write_gaussian_split(dir);
  const std::vector<std::string> inputs{"--train-emb", (dir / "train.memb").string(),
                                        "--validation-emb", (dir / "validation.memb").string()};

  std::vector<std::string> sweep{"eval", "sweep", "--out", (dir / "sweep").string(), "--seed", "4"};
  sweep.insert(sweep.end(), inputs.begin(), inputs.end());
  const auto r = run(sweep);
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "sweep" / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  for (const char* size : {"\nSimple CNAPS-50,", "\nSimple CNAPS-100,", "\nSimple CNAPS-500,",
                           "\nSimple CNAPS-full,"}) {
    CHECK(csv.find(size) != std::string::npos);
  }
  CHECK(run(sweep).out == r.out);

  std::vector<std::string> episode{"eval", "episodic", "--support-size", "100", "--seed", "4",
                                   "--out", (dir / "episode").string()};
  episode.insert(episode.end(), inputs.begin(), inputs.end());
  const auto e = run(episode);
  REQUIRE(e.code == 0);
  CHECK(slurp(dir / "episode" / "report.txt") == e.out);
  CHECK(fs::exists(dir / "episode" / "confusion.csv"));

  std::vector<std::string> both = episode;
  both.insert(both.end(), {"--slices", (dir / "manifest.tsv").string()});
  CHECK(run(both).code == 1);

  std::vector<std::string> bad_size = episode;
  bad_size[3] = "zero";
  CHECK(run(bad_size).code == 1);
}

TEST_CASE("seeded dataset commands are reproducible") {
  const fs::path dir = scratch("dataset_seed");
  const auto annotations = maskpipe::read_voc_dir(kData / "voc");
  std::vector<maskpipe::SliceSample> slices;
  for (int rep = 0; rep < 10; ++rep) {
    for (const auto& a : annotations) {
      const maskpipe::Image img(a.width, a.height, static_cast<std::uint8_t>(40 + rep));
      const auto set = maskpipe::build_slices(
          std::span<const maskpipe::VocAnnotation>(&a, 1),
          [&](const std::string&) { return img; });
      for (auto s : set.slices) {
        s.image_id = std::to_string(rep) + "_" + s.image_id;
        slices.push_back(s);
      }
    }
  }
  maskpipe::write_slices(dir / "all", slices, maskpipe::ImageFormat::Ppm);
  const std::string manifest = (dir / "all" / "manifest.tsv").string();

  for (const std::string& seed : {"1", "2"}) {
    for (const char* run_name : {"a", "b"}) {
      const fs::path out = dir / ("split_" + seed + run_name);
      REQUIRE(run({"dataset", "split", "--manifest", manifest, "--out", out.string(), "--seed", seed,
                   "--format", "ppm"})
                  .code == 0);
    }
    CHECK(slurp(dir / ("split_" + seed + "a") / "train" / "manifest.tsv") ==
          slurp(dir / ("split_" + seed + "b") / "train" / "manifest.tsv"));
  }
  CHECK(slurp(dir / "split_1a" / "train" / "manifest.tsv") !=
        slurp(dir / "split_2a" / "train" / "manifest.tsv"));

  const auto r = run({"dataset", "undersample", "--manifest", manifest, "--cap", "10", "--out",
                      (dir / "under").string(), "--seed", "3", "--format", "ppm"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("slices: 40 -> 30\n") != std::string::npos);

  for (const char* run_name : {"a", "b"}) {
    REQUIRE(run({"dataset", "augment", "--manifest", manifest, "--out",
                 (dir / (std::string("aug_") + run_name)).string(), "--seed", "9", "--format", "ppm"})
                .code == 0);
  }
  CHECK(slurp(dir / "aug_a" / "crops" / "0_three_classes_1.ppm") ==
        slurp(dir / "aug_b" / "crops" / "0_three_classes_1.ppm"));
}

TEST_CASE("annotate and stream commands") {
  const fs::path dir = scratch("annotate");
  const std::string in = (dir / "scene.mdvs").string();
  REQUIRE(run({"stream", "synth", "--out", in, "--frames", "25", "--width", "96", "--height", "64",
               "--seed", "7"})
              .code == 0);

  std::vector<std::string> outputs;
  for (const char* name : {"a", "b"}) {
    const std::string out = (dir / (std::string(name) + ".mdvs")).string();
    const auto r = run({"annotate", "--in", in, "--out", out, "--skip", "3", "--track"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("model calls: 9\n") != std::string::npos);
    outputs.push_back(slurp(out) + slurp(out + ".jsonl"));
  }
  CHECK(outputs[0] == outputs[1]);

  auto source = maskpipe::open_stream(dir / "a.mdvs");
  CHECK(source.info().frame_count == 25);
  std::ifstream sidecar_in(dir / "a.mdvs.jsonl");
  const auto sidecar = maskpipe::parse_sidecar(sidecar_in);
  CHECK(sidecar.records.size() == 25);

  const auto threaded = run({"annotate", "--in", in, "--out", (dir / "q.mdvs").string(), "--skip",
                             "3", "--track", "--queue", "4"});
  REQUIRE(threaded.code == 0);
  CHECK(slurp(dir / "q.mdvs") == slurp(dir / "a.mdvs"));

  CHECK(run({"annotate", "--in", in, "--out", (dir / "x.mdvs").string(), "--model", "magic"}).code == 1);
  CHECK(run({"annotate", "--in", in, "--out", (dir / "x.mdvs").string(), "--model",
             "playback:" + (dir / "nowhere").string()})
            .code == 2);

  const auto bench = run({"bench", "--in", in, "--model", "stub:0.5", "--skip", "5"});
  REQUIRE(bench.code == 0);
  CHECK(bench.out.find("model calls: 5\n") != std::string::npos);
  CHECK(bench.out.find("ms per 100 frames: ") != std::string::npos);

  REQUIRE(run({"stream", "export", "--in", in, "--out", (dir / "frames").string(), "--format", "ppm"})
              .code == 0);
  REQUIRE(run({"stream", "import", "--in", (dir / "frames").string(), "--out",
               (dir / "back.mdvs").string()})
              .code == 0);
  CHECK(slurp(dir / "back.mdvs") == slurp(in));
  CHECK(run({"stream", "synth", "--out", (dir / "y.mdvs").string(), "--fps", "0"}).code == 1);
}

TEST_CASE("help snapshots") {
  const fs::path dir = kData / "cli_help";
  const bool update = std::getenv("MASKPIPE_UPDATE_SNAPSHOTS") != nullptr;
  const auto paths = maskpipe::cli::command_paths();
  CHECK(paths.size() == 23);
  for (const auto& path : paths) {
    CAPTURE(path);
    const std::string help = maskpipe::cli::help_text(path);
    const fs::path file = dir / snapshot_name(path);
    if (update) {
      fs::create_directories(dir);
      std::ofstream(file, std::ios::binary) << help;
    }
    REQUIRE(fs::exists(file));
    CHECK(slurp(file) == help);

    std::vector<std::string> args;
    std::istringstream words(path);
    for (std::string w; words >> w;) args.push_back(w);
    args.push_back("--help");
    const auto r = run(args);
    CHECK(r.code == 0);
    CHECK(r.out == help);
  }
}
