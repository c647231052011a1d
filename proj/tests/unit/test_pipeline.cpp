#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "doctest.h"
#include "maskpipe/errors.hpp"
#include "maskpipe/pipeline.hpp"

using namespace maskpipe;

namespace {

/// Emits the same frame `count` times.
class RepeatSource : public FrameSource {
 public:
  RepeatSource(Image frame, std::uint64_t count) : frame_(std::move(frame)) {
    info_ = {static_cast<std::uint32_t>(frame_.width), static_cast<std::uint32_t>(frame_.height), 30,
             1, count};
  }
  const StreamInfo& info() const override { return info_; }
  bool next(Image& out) override {
    if (pos_ == info_.frame_count) return false;
    ++pos_;
    out = frame_;
    return true;
  }

 private:
  Image frame_;
  StreamInfo info_;
  std::uint64_t pos_ = 0;
};

/// Returns a deterministic pseudo-random detection list per frame and
/// remembers what it returned.
class ScriptedModel : public DetectorModel {
 public:
  const std::vector<std::string>& labels() const override { return labels_; }
  std::vector<Detection> detect(const Image&, std::uint64_t frame) override {
    ++calls;
    if (fail_at && *fail_at == frame) throw std::runtime_error("backbone exploded");
    std::vector<Detection> out;
    for (std::uint64_t k = 0; k < frame % 4; ++k) {
      const double x = 0.1 * static_cast<double>(k) + 0.003 * static_cast<double>(frame % 17);
      out.push_back({{x, 0.2, x + 0.15, 0.5}, 0.3 + 0.1 * static_cast<double>(k), static_cast<int>(k % 3)});
    }
    if (invalid_at && *invalid_at == frame) out.push_back({{0.5, 0.5, 0.4, 0.6}, 0.9, 0});
    outputs[frame] = out;
    return out;
  }

  std::uint64_t calls = 0;
  std::optional<std::uint64_t> fail_at;
  std::optional<std::uint64_t> invalid_at;
  std::map<std::uint64_t, std::vector<Detection>> outputs;

 private:
  std::vector<std::string> labels_{"with_mask", "without_mask", "mask_weared_incorrect"};
};

class CountingModel : public DetectorModel {
 public:
  const std::vector<std::string>& labels() const override { return labels_; }
  std::vector<Detection> detect(const Image&, std::uint64_t) override {
    ++calls;
    return {};
  }
  std::uint64_t calls = 0;

 private:
  std::vector<std::string> labels_{"a"};
};

std::vector<Image> tiny_frames(std::size_t n) {
  std::vector<Image> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(Image(8, 6, static_cast<std::uint8_t>(i)));
  return frames;
}

}  // namespace

TEST_CASE("tracker basics") {
  Tracker t;
  const auto out = t.observe({{{0.1, 0.1, 0.2, 0.2}, 0.9, 0}, {{0.5, 0.5, 0.7, 0.7}, 0.8, 1}}, 0);
  REQUIRE(out.size() == 2);
  CHECK(out[0].track_id == 0);
  CHECK(out[1].track_id == 1);

  const auto again = t.observe({{{0.51, 0.5, 0.71, 0.7}, 0.8, 1}, {{0.8, 0.8, 0.9, 0.9}, 0.5, 2}}, 1);
  CHECK(again[0].track_id == 1);
  CHECK(again[1].track_id == 2);
  CHECK(t.tracks().size() == 3);
  CHECK(t.next_id() == 3);
}

TEST_CASE("constant-velocity extrapolation") {
  Tracker t;
  const double x = 0.2;
  t.observe({{{x, 0.3, x + 0.1, 0.4}, 0.9, 0}}, 0);
  const auto fresh = t.observe({{{x + 0.03, 0.3, x + 0.13, 0.4}, 0.9, 0}}, 3);
  CHECK(fresh[0].track_id == 0);
  const auto at4 = t.predict(4);
  const auto at5 = t.predict(5);
  REQUIRE(at4.size() == 1);
  CHECK(at4[0].detection.box.x1 == doctest::Approx(x + 0.04).epsilon(1e-12));
  CHECK(at5[0].detection.box.x1 == doctest::Approx(x + 0.05).epsilon(1e-12));
  CHECK(at5[0].detection.box.x2 == doctest::Approx(x + 0.15).epsilon(1e-12));
  CHECK(at5[0].detection.box.y1 == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(at5[0].track_id == 0);

  Tracker single;
  single.observe({{{0.2, 0.2, 0.4, 0.4}, 0.7, 2}}, 0);
  const auto still = single.predict(2);
  REQUIRE(still.size() == 1);
  CHECK(still[0].detection == Detection{{0.2, 0.2, 0.4, 0.4}, 0.7, 2});

  Tracker leaving;
  leaving.observe({{{0.8, 0.2, 0.9, 0.3}, 0.7, 0}}, 0);
  leaving.observe({{{0.85, 0.2, 0.95, 0.3}, 0.7, 0}}, 1);
  CHECK(leaving.predict(2).size() == 1);
  CHECK(leaving.predict(2)[0].detection.box.x2 == doctest::Approx(1.0));
  CHECK(leaving.predict(6).empty());
}

TEST_CASE("association is greedy by IoU and thresholded") {
  Tracker t;
  t.observe({{{0.0, 0.0, 0.4, 0.4}, 0.9, 0}, {{0.2, 0.0, 0.6, 0.4}, 0.9, 0}}, 0);
  // Detection 0 overlaps track 1 best; detection 1 then falls to track 0.
  const auto out = t.observe({{{0.21, 0.0, 0.61, 0.4}, 0.9, 0}, {{0.05, 0.0, 0.45, 0.4}, 0.9, 0}}, 1);
  CHECK(out[0].track_id == 1);
  CHECK(out[1].track_id == 0);

  const auto disjoint = t.observe({{{0.7, 0.7, 0.8, 0.8}, 0.9, 0}}, 2);
  CHECK(disjoint[0].track_id == 2);

  Tracker low({0.3, 30});
  low.observe({{{0.0, 0.0, 0.2, 0.2}, 0.9, 0}}, 0);
  // IoU = 0.25 / 1.75 < 0.3
  CHECK(low.observe({{{0.1, 0.1, 0.3, 0.3}, 0.9, 0}}, 1)[0].track_id == 1);

  Tracker cross;
  cross.observe({{{0.1, 0.1, 0.3, 0.3}, 0.9, 0}}, 0);
  const auto recl = cross.observe({{{0.1, 0.1, 0.3, 0.3}, 0.6, 1}}, 1);
  CHECK(recl[0].track_id == 0);
  CHECK(cross.tracks()[0].class_id == 1);
}

TEST_CASE("tracks expire after max_age") {
  Tracker t({0.3, 5});
  t.observe({{{0.1, 0.1, 0.3, 0.3}, 0.9, 0}}, 0);
  CHECK(t.predict(5).size() == 1);
  CHECK(t.predict(6).empty());
  CHECK(t.tracks().empty());
  CHECK(t.observe({{{0.1, 0.1, 0.3, 0.3}, 0.9, 0}}, 7)[0].track_id == 1);
  CHECK_THROWS_AS(Tracker({1.5, 5}), ConfigError);
}

TEST_CASE("NCC refinement follows a target that changes speed") {
  SceneSpec spec;
  spec.width = 80;
  spec.height = 60;
  const auto frame_with = [&](double x) {
    SceneSpec s = spec;
    s.objects = {{1, {x, 0.3, x + 0.2, 0.6}, 0, 0}};
    Image img = render_scene_frame(s, 0);
    // A textured patch inside the object so the match is unique.
    const PixelRect r = raster_rect({x, 0.3, x + 0.2, 0.6}, 80, 60);
    for (int y = r.y0 + 2; y < r.y1 - 2; y += 3)
      for (int xx = r.x0 + 2; xx < r.x1 - 2; xx += 2) img.at(xx, y)[2] = static_cast<std::uint8_t>(xx * 7);
    return img;
  };
  Tracker plain;
  Tracker refined({}, make_ncc_refiner(6));
  const Image f0 = frame_with(0.2);
  const Image f1 = frame_with(0.25);
  const Image f2 = frame_with(0.25);  // the target stopped
  SyntheticDetector det;
  for (Tracker* t : {&plain, &refined}) {
    t->observe(det.detect(f0, 0), 0, &f0);
    t->observe(det.detect(f1, 1), 1, &f1);
  }
  const double plain_x = plain.predict(2, &f2)[0].detection.box.x1;
  const double refined_x = refined.predict(2, &f2)[0].detection.box.x1;
  CHECK(plain_x == doctest::Approx(0.3));
  CHECK(refined_x == doctest::Approx(0.25));
}

TEST_CASE("model call count is ceil(N / skip)") {
  CHECK(expected_model_calls(30, 3) == 10);
  CHECK(expected_model_calls(31, 3) == 11);
  CHECK(expected_model_calls(0, 4) == 0);

  const Image pixel(1, 1);
  for (std::uint64_t n = 0; n <= 1000; ++n) {
    for (int skip = 1; skip <= 10; ++skip) {
      RepeatSource src(pixel, n);
      CountingModel model;
      NullSink sink;
      PipelineOptions o;
      o.skip = skip;
      o.draw = false;
      o.keep_records = false;
      const auto r = run_pipeline(src, model, sink, o);
      REQUIRE(model.calls == (n + static_cast<std::uint64_t>(skip) - 1) / static_cast<std::uint64_t>(skip));
      REQUIRE(r.model_calls == model.calls);
      REQUIRE(sink.count == n);
    }
  }
}

TEST_CASE("skip=1 without tracking passes model output through") {
  MemorySource src(tiny_frames(40));
  ScriptedModel model;
  MemorySink sink;
  std::stringstream side;
  PipelineOptions o;
  const auto r = run_pipeline(src, model, sink, o, &side);
  CHECK(r.frames == 40);
  CHECK(model.calls == 40);
  const Sidecar parsed = parse_sidecar(side);
  CHECK(parsed.labels == model.labels());
  CHECK(parsed.info.width == 8);
  REQUIRE(parsed.records.size() == 40);
  for (const auto& rec : parsed.records) {
    CHECK(rec.source == FrameOrigin::Fresh);
    CHECK(rec.from_frame == rec.frame);
    const auto& raw = model.outputs.at(rec.frame);
    REQUIRE(rec.detections.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(rec.detections[i].detection == raw[i]);
      CHECK_FALSE(rec.detections[i].track_id.has_value());
    }
  }
  CHECK(parsed.records == r.records);
}

TEST_CASE("carried and tracked frames reference their fresh frame") {
  for (bool track : {false, true}) {
    MemorySource src(tiny_frames(23));
    ScriptedModel model;
    MemorySink sink;
    std::stringstream side;
    PipelineOptions o;
    o.skip = 4;
    o.track = track;
    run_pipeline(src, model, sink, o, &side);
    CHECK(model.calls == 6);
    const Sidecar parsed = parse_sidecar(side);
    CHECK(parsed.skip == 4);
    CHECK(parsed.track == track);
    REQUIRE(parsed.records.size() == 23);
    for (std::uint64_t i = 0; i < 23; ++i) {
      const auto& rec = parsed.records[i];
      CHECK(rec.frame == i);
      CHECK(rec.from_frame == i - i % 4);
      if (i % 4 == 0) {
        CHECK(rec.source == FrameOrigin::Fresh);
      } else {
        CHECK(rec.source == (track ? FrameOrigin::Tracked : FrameOrigin::Carried));
      }
      if (!track && i % 4 != 0) CHECK(rec.detections == parsed.records[i - i % 4].detections);
      for (const auto& d : rec.detections) CHECK(d.track_id.has_value() == track);
    }
  }
}

TEST_CASE("static scene with tracking keeps one box and one id") {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.frame_count = 20;
  spec.objects = {{2, {0.25, 0.25, 0.5, 0.75}, 0, 0}};
  SceneSource src(spec);
  SyntheticDetector model;
  MemorySink sink;
  PipelineOptions o;
  o.skip = 3;
  o.track = true;
  const auto r = run_pipeline(src, model, sink, o);
  REQUIRE(r.records.size() == 20);
  for (const auto& rec : r.records) {
    REQUIRE(rec.detections.size() == 1);
    CHECK(rec.detections[0].detection.box == BBox{0.25, 0.25, 0.5, 0.75});
    CHECK(rec.detections[0].track_id == 0);
  }
  CHECK(sink.frames[0] == sink.frames[1]);
  CHECK(sink.frames[0] != render_scene_frame(spec, 0));
}

TEST_CASE("moving scene with tracking predicts between model calls") {
  SceneSpec spec;
  spec.width = 200;
  spec.height = 100;
  spec.frame_count = 12;
  spec.objects = {{0, {0.1, 0.3, 0.2, 0.6}, 0.01, 0}};
  SceneSource src(spec);
  SyntheticDetector model;
  NullSink sink;
  PipelineOptions o;
  o.skip = 3;
  o.track = true;
  const auto r = run_pipeline(src, model, sink, o);
  for (std::uint64_t f = 4; f < 12; ++f) {
    if (f % 3 == 0) continue;
    REQUIRE(r.records[f].detections.size() == 1);
    CHECK(r.records[f].detections[0].detection.box.x1 ==
          doctest::Approx(0.1 + 0.01 * static_cast<double>(f)).epsilon(1e-9));
  }
}

TEST_CASE("output stream matches input shape and threaded mode matches sequential") {
  const SceneSpec spec = random_scene(11, 96, 64, 25, 3);
  const auto path = std::filesystem::temp_directory_path() / "maskpipe_pipeline_out.mdvs";
  std::vector<FrameRecord> sequential_records;
  std::vector<Image> sequential_frames;
  for (std::size_t capacity : {1u, 4u}) {
    SceneSource src(spec);
    SyntheticDetector model;
    std::stringstream side;
    {
      StreamWriter out(path, src.info());
      PipelineOptions o;
      o.skip = 2;
      o.track = true;
      o.queue_capacity = capacity;
      const auto r = run_pipeline(src, model, out, o, &side);
      out.close();
      CHECK(r.model_calls == 13);
      if (capacity == 1) {
        sequential_records = r.records;
      } else {
        CHECK(r.records == sequential_records);
      }
    }
    StreamInfo info;
    const auto frames = read_all_frames(path, &info);
    CHECK(info == StreamInfo{96, 64, 30, 1, 25});
    if (capacity == 1) {
      sequential_frames = frames;
    } else {
      CHECK(frames == sequential_frames);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("pipeline errors") {
  for (std::size_t capacity : {1u, 3u}) {
    MemorySource src(tiny_frames(10));
    ScriptedModel model;
    model.fail_at = 6;
    NullSink sink;
    PipelineOptions o;
    o.skip = 2;
    o.queue_capacity = capacity;
    try {
      run_pipeline(src, model, sink, o);
      FAIL("expected ModelError");
    } catch (const ModelError& e) {
      CHECK(std::string(e.what()).find("frame 6") != std::string::npos);
    }
  }
  {
    MemorySource src(tiny_frames(10));
    ScriptedModel model;
    model.invalid_at = 3;
    NullSink sink;
    CHECK_THROWS_AS(run_pipeline(src, model, sink, {}), ModelError);
  }
  for (std::size_t capacity : {1u, 3u}) {
    auto frames = tiny_frames(5);
    frames[3] = Image(9, 6);
    MemorySource src(frames);
    CountingModel model;
    NullSink sink;
    PipelineOptions o;
    o.queue_capacity = capacity;
    try {
      run_pipeline(src, model, sink, o);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("frame 3") != std::string::npos);
    }
  }
  MemorySource src(tiny_frames(2));
  CountingModel model;
  NullSink sink;
  PipelineOptions bad;
  bad.skip = 0;
  CHECK_THROWS_AS(run_pipeline(src, model, sink, bad), ConfigError);

  std::stringstream junk("{\"labels\":[]}\n");
  CHECK_THROWS_AS(parse_sidecar(junk), ParseError);
}

TEST_CASE("pipeline bench accounting") {
  auto stub = std::make_shared<FixedCostModel>(std::chrono::milliseconds(10));
  const Image hd(1920, 1080, 90);
  RepeatSource one(hd, 8);
  const auto every = pipeline_bench(one, *stub, 1);
  RepeatSource two(hd, 8);
  const auto half = pipeline_bench(two, *stub, 2);

  CHECK(every.width == 1920);
  CHECK(every.height == 1080);
  CHECK(every.model_calls == 8);
  CHECK(half.model_calls == 4);
  CHECK(half.model_ms / every.model_ms == doctest::Approx(0.5).epsilon(0.2));
  for (const auto& r : {every, half}) {
    CHECK(std::abs(r.model_ms + r.overhead_ms - r.total_ms) <= 0.05 * r.total_ms);
    CHECK(r.ms_per_100 == doctest::Approx(100.0 * r.total_ms / 8.0));
  }
  const std::string text = render_bench(every);
  CHECK(text.find("resolution: 1920x1080") != std::string::npos);
  CHECK(text.find("model calls: 8") != std::string::npos);
}
