#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "maskpipe/geometry.hpp"
#include "maskpipe/image.hpp"
#include "maskpipe/video.hpp"
#include "maskpipe/yolo_head.hpp"

namespace maskpipe {

/// A per-frame detector. Boxes are normalized corners; class ids index
/// labels(), which must not change during a stream.
class DetectorModel {
 public:
  virtual ~DetectorModel() = default;
  virtual const std::vector<std::string>& labels() const = 0;
  virtual std::vector<Detection> detect(const Image& frame, std::uint64_t frame_index) = 0;
};

/// Solid rectangles moving at constant velocity over a gray background. Each
/// class has its own marker colour, which never occurs in the background.
struct SceneObject {
  int class_id = 0;
  BBox start;
  double vx = 0.0;  // normalized units per frame
  double vy = 0.0;
};

struct SceneSpec {
  int width = 320;
  int height = 240;
  std::uint64_t frame_count = 30;
  std::uint32_t fps_num = 30;
  std::uint32_t fps_den = 1;
  std::vector<SceneObject> objects;
};

/// Marker colour of class `class_id` (0, 1 or 2).
const std::uint8_t* marker_color(int class_id);

/// Pixel rectangle covered by `box` on a w x h frame: [floor(x1 w), floor(x2 w)).
PixelRect raster_rect(const BBox& box, int w, int h);

BBox object_box(const SceneObject& object, std::uint64_t frame_index);
Image render_scene_frame(const SceneSpec& spec, std::uint64_t frame_index);
/// `count` objects with random classes, sizes and slow velocities.
SceneSpec random_scene(std::uint64_t seed, int width, int height, std::uint64_t frames, int count);

/// Renders frames on demand.
class SceneSource : public FrameSource {
 public:
  explicit SceneSource(SceneSpec spec);
  const StreamInfo& info() const override { return info_; }
  bool next(Image& frame) override;

 private:
  SceneSpec spec_;
  StreamInfo info_;
  std::uint64_t pos_ = 0;
};

/// Finds 4-connected blobs of marker colour and reports each as a detection
/// whose confidence is the blob's fill ratio of its bounding box. Blobs
/// smaller than `min_pixels` are ignored.
class SyntheticDetector : public DetectorModel {
 public:
  explicit SyntheticDetector(int min_pixels = 4);
  const std::vector<std::string>& labels() const override { return labels_; }
  std::vector<Detection> detect(const Image& frame, std::uint64_t frame_index) override;

 private:
  std::vector<std::string> labels_;
  int min_pixels_;
};

/// Replays recorded backbone output: frame i is decoded from
/// <dir>/<i zero-padded to 6 digits>.mgrd. A missing file is a ModelError.
class PlaybackDetector : public DetectorModel {
 public:
  PlaybackDetector(std::filesystem::path dir, AnchorSet anchors, DecodeOptions options,
                   std::vector<std::string> labels);
  const std::vector<std::string>& labels() const override { return labels_; }
  std::vector<Detection> detect(const Image& frame, std::uint64_t frame_index) override;

  static std::string file_name(std::uint64_t frame_index);

 private:
  std::filesystem::path dir_;
  AnchorSet anchors_;
  DecodeOptions options_;
  std::vector<std::string> labels_;
};

/// Spins for a fixed time per call, then forwards to `inner` (or returns no
/// detections).
class FixedCostModel : public DetectorModel {
 public:
  explicit FixedCostModel(std::chrono::nanoseconds cost,
                          std::shared_ptr<DetectorModel> inner = nullptr);
  const std::vector<std::string>& labels() const override;
  std::vector<Detection> detect(const Image& frame, std::uint64_t frame_index) override;

 private:
  std::chrono::nanoseconds cost_;
  std::shared_ptr<DetectorModel> inner_;
  std::vector<std::string> labels_;
};

}  // namespace maskpipe
