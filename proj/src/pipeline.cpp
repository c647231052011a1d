#include "maskpipe/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "maskpipe/annotate.hpp"
#include "maskpipe/errors.hpp"
#include "maskpipe/metrics.hpp"

namespace maskpipe {
namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Closing wakes every waiter; pop() then drains what is left and returns
/// nullopt.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct Work {
  std::uint64_t index = 0;
  Image frame;
  bool has_fresh = false;
  std::vector<Detection> fresh;
  FrameRecord record;
};

class Stages {
 public:
  Stages(FrameSource& in, DetectorModel& model, FrameSink& out, const PipelineOptions& options,
         std::ostream* sidecar, PipelineResult& result)
      : in_(in),
        model_(model),
        out_(out),
        options_(options),
        sidecar_(sidecar),
        result_(result),
        tracker_(options.tracker, options.refiner) {}

  bool read(Work& w) {
    const auto t0 = Clock::now();
    w.index = next_index_;
    const bool ok = in_.next(w.frame);
    if (ok) {
      const StreamInfo& info = in_.info();
      if (w.frame.width != static_cast<int>(info.width) ||
          w.frame.height != static_cast<int>(info.height)) {
        throw FormatError("frame " + std::to_string(w.index) + " is " +
                          std::to_string(w.frame.width) + "x" + std::to_string(w.frame.height) +
                          " but the stream is " + std::to_string(info.width) + "x" +
                          std::to_string(info.height));
      }
      ++next_index_;
    }
    result_.times.read_ms += ms_since(t0);
    return ok;
  }

  void infer(Work& w) {
    if (w.index % static_cast<std::uint64_t>(options_.skip) != 0) return;
    const auto t0 = Clock::now();
    std::vector<Detection> dets;
    try {
      dets = model_.detect(w.frame, w.index);
    } catch (const std::exception& e) {
      throw ModelError("model failed on frame " + std::to_string(w.index) + ": " + e.what());
    }
    result_.times.model_ms += ms_since(t0);
    ++result_.model_calls;
    const auto classes = static_cast<int>(model_.labels().size());
    for (const auto& d : dets) {
      if (!is_valid(d.box) || !(d.confidence >= 0.0 && d.confidence <= 1.0) || d.class_id < 0 ||
          d.class_id >= classes) {
        throw ModelError("model returned an invalid detection on frame " +
                         std::to_string(w.index));
      }
    }
    w.fresh = std::move(dets);
    w.has_fresh = true;
  }

  void post(Work& w) {
    auto t0 = Clock::now();
    FrameRecord& r = w.record;
    r.frame = w.index;
    const Image* pixels = options_.refiner ? &w.frame : nullptr;
    const auto frame = static_cast<std::int64_t>(w.index);
    if (w.has_fresh) {
      r.source = FrameOrigin::Fresh;
      r.from_frame = w.index;
      if (options_.track) {
        r.detections = tracker_.observe(w.fresh, frame, pixels);
      } else {
        r.detections.reserve(w.fresh.size());
        for (const auto& d : w.fresh) r.detections.push_back({d, std::nullopt});
      }
      last_fresh_ = r.detections;
      last_fresh_index_ = w.index;
    } else {
      r.from_frame = last_fresh_index_;
      if (options_.track) {
        r.source = FrameOrigin::Tracked;
        r.detections = tracker_.predict(frame, pixels);
      } else {
        r.source = FrameOrigin::Carried;
        r.detections = last_fresh_;
      }
    }
    result_.times.track_ms += ms_since(t0);

    if (options_.draw) {
      t0 = Clock::now();
      std::vector<Detection> plain;
      plain.reserve(r.detections.size());
      for (const auto& td : r.detections) plain.push_back(td.detection);
      w.frame = draw_annotations(w.frame, plain, model_.labels());
      result_.times.draw_ms += ms_since(t0);
    }
  }

  void write(Work& w) {
    const auto t0 = Clock::now();
    out_.write(w.frame);
    if (sidecar_) *sidecar_ << sidecar_line(w.record) << '\n';
    ++result_.frames;
    if (options_.keep_records) result_.records.push_back(std::move(w.record));
    result_.times.write_ms += ms_since(t0);
  }

 private:
  FrameSource& in_;
  DetectorModel& model_;
  FrameSink& out_;
  const PipelineOptions& options_;
  std::ostream* sidecar_;
  PipelineResult& result_;
  Tracker tracker_;
  std::uint64_t next_index_ = 0;
  std::vector<TrackedDetection> last_fresh_;
  std::uint64_t last_fresh_index_ = 0;
};

void run_sequential(Stages& s) {
  Work w;
  while (s.read(w)) {
    s.infer(w);
    s.post(w);
    s.write(w);
    w.has_fresh = false;
    w.fresh.clear();
    w.record = {};
  }
}

void run_threaded(Stages& s, std::size_t capacity) {
  BoundedQueue<Work> to_infer(capacity), to_post(capacity), to_write(capacity);
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto fail = [&] {
    {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
    to_infer.close();
    to_post.close();
    to_write.close();
  };

  std::thread reader([&] {
    try {
      while (true) {
        Work w;
        if (!s.read(w) || !to_infer.push(std::move(w))) break;
      }
    } catch (...) {
      fail();
    }
    to_infer.close();
  });
  std::thread inferer([&] {
    try {
      while (auto w = to_infer.pop()) {
        s.infer(*w);
        if (!to_post.push(std::move(*w))) break;
      }
    } catch (...) {
      fail();
    }
    to_post.close();
  });
  std::thread poster([&] {
    try {
      while (auto w = to_post.pop()) {
        s.post(*w);
        if (!to_write.push(std::move(*w))) break;
      }
    } catch (...) {
      fail();
    }
    to_write.close();
  });
  try {
    while (auto w = to_write.pop()) s.write(*w);
  } catch (...) {
    fail();
  }
  reader.join();
  inferer.join();
  poster.join();
  if (error) std::rethrow_exception(error);
}

json detection_json(const TrackedDetection& td) {
  const Detection& d = td.detection;
  json j = {{"x1", d.box.x1}, {"y1", d.box.y1},       {"x2", d.box.x2},
            {"y2", d.box.y2}, {"conf", d.confidence}, {"class_id", d.class_id}};
  if (td.track_id) j["track_id"] = *td.track_id;
  return j;
}

FrameOrigin parse_origin(const std::string& s) {
  if (s == "fresh") return FrameOrigin::Fresh;
  if (s == "carried") return FrameOrigin::Carried;
  if (s == "tracked") return FrameOrigin::Tracked;
  throw ParseError("unknown frame source '" + s + "'");
}

}  // namespace

const char* origin_name(FrameOrigin origin) {
  switch (origin) {
    case FrameOrigin::Fresh: return "fresh";
    case FrameOrigin::Carried: return "carried";
    case FrameOrigin::Tracked: return "tracked";
  }
  return "fresh";
}

std::uint64_t expected_model_calls(std::uint64_t frames, int skip) {
  const auto k = static_cast<std::uint64_t>(skip);
  return (frames + k - 1) / k;
}

PipelineResult run_pipeline(FrameSource& in, DetectorModel& model, FrameSink& out,
                            const PipelineOptions& options, std::ostream* sidecar) {
  if (options.skip < 1) throw ConfigError("skip must be >= 1, got " + std::to_string(options.skip));
  PipelineResult result;
  result.info = in.info();
  result.labels = model.labels();
  if (sidecar) *sidecar << sidecar_header(result.labels, result.info, options) << '\n';

  const auto t0 = Clock::now();
  Stages stages(in, model, out, options, sidecar, result);
  if (options.queue_capacity <= 1) {
    run_sequential(stages);
  } else {
    run_threaded(stages, options.queue_capacity);
  }
  result.times.total_ms = ms_since(t0);
  return result;
}

std::string sidecar_header(const std::vector<std::string>& labels, const StreamInfo& info,
                           const PipelineOptions& options) {
  const json j = {{"labels", labels},
                  {"width", info.width},
                  {"height", info.height},
                  {"fps", {info.fps_num, info.fps_den}},
                  {"frame_count", info.frame_count},
                  {"skip", options.skip},
                  {"track", options.track}};
  return j.dump();
}

std::string sidecar_line(const FrameRecord& record) {
  json dets = json::array();
  for (const auto& td : record.detections) dets.push_back(detection_json(td));
  const json j = {{"frame", record.frame},
                  {"source", origin_name(record.source)},
                  {"from_frame", record.from_frame},
                  {"detections", std::move(dets)}};
  return j.dump();
}

Sidecar parse_sidecar(std::istream& in) {
  Sidecar out;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        out.labels = j.at("labels").get<std::vector<std::string>>();
        out.info.width = j.at("width").get<std::uint32_t>();
        out.info.height = j.at("height").get<std::uint32_t>();
        out.info.fps_num = j.at("fps").at(0).get<std::uint32_t>();
        out.info.fps_den = j.at("fps").at(1).get<std::uint32_t>();
        out.info.frame_count = j.at("frame_count").get<std::uint64_t>();
        out.skip = j.at("skip").get<int>();
        out.track = j.at("track").get<bool>();
        have_header = true;
        continue;
      }
      FrameRecord r;
      r.frame = j.at("frame").get<std::uint64_t>();
      r.source = parse_origin(j.at("source").get<std::string>());
      r.from_frame = j.at("from_frame").get<std::uint64_t>();
      for (const auto& d : j.at("detections")) {
        TrackedDetection td;
        td.detection.box = {d.at("x1").get<double>(), d.at("y1").get<double>(),
                            d.at("x2").get<double>(), d.at("y2").get<double>()};
        td.detection.confidence = d.at("conf").get<double>();
        td.detection.class_id = d.at("class_id").get<int>();
        if (d.contains("track_id")) td.track_id = d.at("track_id").get<int>();
        r.detections.push_back(td);
      }
      out.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError("sidecar line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("sidecar line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError("sidecar has no header line");
  return out;
}

PipelineBenchReport pipeline_bench(FrameSource& in, DetectorModel& model, int skip, bool track) {
  PipelineOptions options;
  options.skip = skip;
  options.track = track;
  options.keep_records = false;
  NullSink sink;
  const PipelineResult r = run_pipeline(in, model, sink, options);
  PipelineBenchReport report;
  report.width = r.info.width;
  report.height = r.info.height;
  report.frames = r.frames;
  report.model_calls = r.model_calls;
  report.skip = skip;
  report.total_ms = r.times.total_ms;
  report.model_ms = r.times.model_ms;
  report.overhead_ms = r.times.overhead_ms();
  if (r.frames > 0) {
    report.ms_per_100 = make_speed_report(r.frames, r.times.total_ms).ms_per_100;
    report.frames_per_second =
        r.times.total_ms > 0 ? 1000.0 * static_cast<double>(r.frames) / r.times.total_ms : 0.0;
  }
  return report;
}

std::string render_bench(const PipelineBenchReport& r) {
  const auto num = [](double v) { return format_number(v, 2); };
  return "resolution: " + std::to_string(r.width) + "x" + std::to_string(r.height) + "\n" +
         "frames: " + std::to_string(r.frames) + "\n" + "skip: " + std::to_string(r.skip) +
         "\n" + "model calls: " + std::to_string(r.model_calls) + "\n" +
         "total ms: " + num(r.total_ms) + "\n" + "model ms: " + num(r.model_ms) + "\n" +
         "overhead ms: " + num(r.overhead_ms) + "\n" + "frames per second: " +
         num(r.frames_per_second) + "\n" + "ms per 100 frames: " + num(r.ms_per_100) + "\n";
}

}  // namespace maskpipe
