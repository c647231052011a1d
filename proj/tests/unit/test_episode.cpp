#include <filesystem>
#include <random>

#include "doctest.h"
#include "maskpipe/episode.hpp"
#include "maskpipe/errors.hpp"

using namespace maskpipe;

namespace {

// Three well separated clusters in d dimensions; counts per class given.
std::vector<LabeledEmbedding> clusters(std::mt19937_64& rng, std::vector<int> counts, int d = 6,
                                       double spread = 0.1) {
  std::normal_distribution<double> n(0.0, spread);
  std::vector<LabeledEmbedding> out;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      Eigen::VectorXd v(d);
      for (int j = 0; j < d; ++j) v[j] = n(rng) + (j % 3 == c ? 3.0 : 0.0);
      out.push_back({c, v});
    }
  }
  return out;
}

Image tinted(std::mt19937_64& rng, int channel, int w, int h) {
  std::uniform_int_distribution<int> noise(0, 60);
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y)[c] = static_cast<std::uint8_t>(noise(rng) + (c == channel ? 180 : 0));
  return img;
}

}  // namespace

TEST_CASE("support size parsing and labels") {
  CHECK(SupportSize::parse("50") == SupportSize::of(50));
  CHECK(SupportSize::parse("full").is_full());
  CHECK(SupportSize::of(100).label() == "100");
  CHECK(SupportSize::full().label() == "full");
  CHECK_THROWS_AS(SupportSize::parse("0"), ConfigError);
  CHECK_THROWS_AS(SupportSize::parse("12x"), ConfigError);
}

TEST_CASE("episode on the published validation composition") {
  std::mt19937_64 rng(1);
  // 183 with mask, 129 without, 40 worn incorrectly.
  const EmbeddingSplit split{clusters(rng, {400, 300, 91}), clusters(rng, {183, 129, 40})};
  EpisodeConfig cfg;
  cfg.support_size = SupportSize::of(50);
  const auto report = run_episode(split, cfg);
  CHECK(report.queries_per_class == std::vector<std::int64_t>{183, 129, 40});
  CHECK(report.supports_per_class == std::vector<std::size_t>{50, 50, 50});
  CHECK(report.confusion.total() == 352);
  CHECK(report.accuracy == 1.0);

  const std::string text = render_episode(report, LabelCatalog::mask_task());
  CHECK(text.find("Mask worn incorrectly") != std::string::npos);
  CHECK(text.find("183") != std::string::npos);
}

TEST_CASE("support size larger than a class pool names the class") {
  std::mt19937_64 rng(2);
  const EmbeddingSplit split{clusters(rng, {2546, 508, 91}), clusters(rng, {5, 5, 5})};
  EpisodeConfig cfg;
  cfg.support_size = SupportSize::of(100);
  try {
    run_episode(split, cfg);
    FAIL("expected MissingSupportError");
  } catch (const MissingSupportError& e) {
    CHECK(std::string(e.what()).find("Mask worn incorrectly") != std::string::npos);
  }
  cfg.support_size = SupportSize::of(91);
  CHECK_NOTHROW(run_episode(split, cfg));
}

TEST_CASE("episodes are deterministic under a seed") {
  std::mt19937_64 rng(3);
  const EmbeddingSplit split{clusters(rng, {60, 60, 60}, 6, 1.5), clusters(rng, {30, 30, 30}, 6, 1.5)};
  EpisodeConfig cfg;
  cfg.support_size = SupportSize::of(10);
  cfg.seed = 42;
  const auto a = run_episode(split, cfg);
  const auto b = run_episode(split, cfg);
  CHECK(a.confusion == b.confusion);
  CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("undersampled support pool") {
  std::mt19937_64 rng(4);
  const EmbeddingSplit split{clusters(rng, {300, 100, 20}), clusters(rng, {10, 10, 10})};
  EpisodeConfig cfg;
  cfg.undersample_cap = 20;
  const auto report = run_episode(split, cfg);
  CHECK(report.supports_per_class == std::vector<std::size_t>{20, 20, 20});
}

TEST_CASE("support-size sweep") {
  std::mt19937_64 rng(5);
  const EmbeddingSplit split{clusters(rng, {600, 600, 600}, 6, 1.0), clusters(rng, {50, 50, 50}, 6, 1.0)};
  const std::vector<SupportSize> sizes{SupportSize::of(50), SupportSize::of(100), SupportSize::of(500),
                                       SupportSize::full()};
  const auto rows = sweep_support_sizes(split, sizes, EpisodeConfig{});
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].report.supports_per_class[0] == 600);
  const auto table = sweep_table(rows, "Baseline");
  CHECK(table.rows[0].label == "Simple CNAPS-50");
  CHECK(table.rows[3].label == "Simple CNAPS-full");

  const std::vector<SupportSize> one{SupportSize::of(50)};
  CHECK(sweep_support_sizes(split, one, EpisodeConfig{}).size() == 1);
  CHECK_THROWS_AS(sweep_support_sizes(split, {}, EpisodeConfig{}), ConfigError);
}

TEST_CASE("published validation accuracies render in the sweep layout") {
  ReportTable t{"Settings", {"Mobilenetv3", "YoloNano"}, {4, 4}, {}};
  t.rows = {{"FC Classifier", {0.8457, 0.8590}},
            {"Simple CNAPS-50", {0.8536, 0.8557}},
            {"Simple CNAPS-100", {0.8617, 0.8876}},
            {"Simple CNAPS-500", {0.8777, 0.8776}},
            {"Simple CNAPS-full", {0.8457, 0.8513}}};
  CHECK(render_text(t) ==
        "Settings           Mobilenetv3  YoloNano\n"
        "FC Classifier           0.8457    0.8590\n"
        "Simple CNAPS-50         0.8536    0.8557\n"
        "Simple CNAPS-100        0.8617    0.8876\n"
        "Simple CNAPS-500        0.8777    0.8776\n"
        "Simple CNAPS-full       0.8457    0.8513\n");
}

TEST_CASE("baseline embedder") {
  std::mt19937_64 rng(6);
  const BaselineEmbedder e;
  const Image img = tinted(rng, 1, 23, 17);
  const Eigen::VectorXd v = e.embed(img);
  CHECK(v.size() == 112);
  CHECK(e.dimension() == 112);
  CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  CHECK(e.embed(img) == v);
  CHECK(e.embed(tinted(rng, 1, 1, 1)).allFinite());
  CHECK(e.embed(Image(3, 2, 0)).allFinite());
}

TEST_CASE("routine: pretrain, finetune, query") {
  std::mt19937_64 rng(7);
  std::vector<SliceSample> train, val;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 30; ++i) train.push_back({"t", {}, c, tinted(rng, c, 12 + i % 5, 14)});
    for (int i = 0; i < 10; ++i) val.push_back({"v", {}, c, tinted(rng, c, 16, 9 + i % 4)});
  }
  FewShotRoutine routine(std::make_shared<BaselineEmbedder>());
  EpisodeConfig cfg;
  cfg.support_size = SupportSize::of(20);
  CHECK(routine.query(train, val, cfg).accuracy == 1.0);

  int calls = 0;
  routine.finetune([&calls](const Eigen::VectorXd& v) {
    ++calls;
    return Eigen::VectorXd(2.0 * v);
  });
  const auto split = routine.embed(train, val);
  CHECK(calls == 120);
  CHECK(std::abs(split.train[0].vector.norm() - 2.0) < 1e-12);
}

TEST_CASE("MEMB embedding files") {
  std::vector<LabeledEmbedding> recs{{0, Eigen::Vector3d(1, 2, 3)}, {2, Eigen::Vector3d(-1, 0.5, 1e-300)}};
  const std::string bytes = encode_embeddings(recs);
  CHECK(bytes.size() == 12 + 2 * (4 + 24));
  const auto back = decode_embeddings(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[1].class_id == 2);
  CHECK(back[1].vector == recs[1].vector);
  CHECK_THROWS_AS(decode_embeddings(bytes.substr(0, bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(decode_embeddings("MEMX" + bytes.substr(4)), FormatError);
  CHECK(decode_embeddings(encode_embeddings({})).empty());

  const auto path = std::filesystem::temp_directory_path() / "maskpipe_test.memb";
  write_embeddings(path, recs);
  CHECK(read_embeddings(path)[0].vector == recs[0].vector);
  std::filesystem::remove(path);
}
