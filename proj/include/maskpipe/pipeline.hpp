#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "maskpipe/detector.hpp"
#include "maskpipe/tracker.hpp"
#include "maskpipe/video.hpp"

namespace maskpipe {

enum class FrameOrigin { Fresh, Carried, Tracked };

const char* origin_name(FrameOrigin origin);

struct FrameRecord {
  std::uint64_t frame = 0;
  FrameOrigin source = FrameOrigin::Fresh;
  /// The model-evaluated frame these detections derive from.
  std::uint64_t from_frame = 0;
  std::vector<TrackedDetection> detections;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct PipelineOptions {
  int skip = 1;
  bool track = false;
  TrackerOptions tracker;
  std::shared_ptr<TrackRefiner> refiner;
  bool draw = true;
  /// Capacity of the queues between the read, infer, track/draw and write
  /// stages. 0 or 1 runs every stage in turn on the calling thread.
  std::size_t queue_capacity = 1;
  bool keep_records = true;
};

struct StageTimes {
  double read_ms = 0.0;
  double model_ms = 0.0;
  double track_ms = 0.0;
  double draw_ms = 0.0;
  double write_ms = 0.0;
  double total_ms = 0.0;

  double overhead_ms() const { return read_ms + track_ms + draw_ms + write_ms; }
};

struct PipelineResult {
  StreamInfo info;
  std::vector<std::string> labels;
  std::uint64_t frames = 0;
  std::uint64_t model_calls = 0;
  std::vector<FrameRecord> records;
  StageTimes times;
};

/// ceil(frames / skip)
std::uint64_t expected_model_calls(std::uint64_t frames, int skip);

/// Runs the model on frames 0, skip, 2 skip, ... Other frames reuse the last
/// model output ("carried"), or with tracking on, the tracker's extrapolated
/// boxes ("tracked"). Every frame is annotated (unless options.draw is off)
/// and written to `out`; when `sidecar` is given, one JSON header line and one
/// JSON line per frame are written to it.
///
/// Throws ConfigError for skip < 1, FormatError when a frame's dimensions
/// differ from the stream's, and ModelError naming the frame when the model
/// throws or returns an invalid detection.
PipelineResult run_pipeline(FrameSource& in, DetectorModel& model, FrameSink& out,
                            const PipelineOptions& options, std::ostream* sidecar = nullptr);

std::string sidecar_header(const std::vector<std::string>& labels, const StreamInfo& info,
                           const PipelineOptions& options);
std::string sidecar_line(const FrameRecord& record);

struct Sidecar {
  std::vector<std::string> labels;
  StreamInfo info;
  int skip = 1;
  bool track = false;
  std::vector<FrameRecord> records;
};

/// Throws ParseError with the line number on malformed input.
Sidecar parse_sidecar(std::istream& in);

struct PipelineBenchReport {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint64_t frames = 0;
  std::uint64_t model_calls = 0;
  int skip = 1;
  double total_ms = 0.0;
  double model_ms = 0.0;
  double overhead_ms = 0.0;
  double frames_per_second = 0.0;
  double ms_per_100 = 0.0;
};

/// Times one sequential pass with annotation on and output discarded.
PipelineBenchReport pipeline_bench(FrameSource& in, DetectorModel& model, int skip,
                                   bool track = false);
std::string render_bench(const PipelineBenchReport& report);

}  // namespace maskpipe
