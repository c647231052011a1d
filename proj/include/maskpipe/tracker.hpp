#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "maskpipe/geometry.hpp"
#include "maskpipe/image.hpp"

namespace maskpipe {

struct Track {
  int id = 0;
  int class_id = 0;
  double confidence = 0.0;
  BBox box;                   // last observed box
  std::int64_t last_seen = 0; // frame index of that observation
  std::optional<BBox> previous_box;
  std::int64_t previous_seen = 0;
  int hits = 0;               // observations so far

  /// Per-frame displacement from the last two observations; zero with one.
  BBox velocity() const;
  /// Constant-velocity extrapolation to `frame`.
  BBox predict(std::int64_t frame) const;
};

struct TrackedDetection {
  Detection detection;
  std::optional<int> track_id;

  friend bool operator==(const TrackedDetection&, const TrackedDetection&) = default;
};

struct TrackerOptions {
  double iou_threshold = 0.3;
  /// Tracks unseen for more than this many frames are dropped.
  int max_age = 30;
};

/// Adjusts predicted boxes from pixel content. observe() sees every frame
/// on which a track is matched; refine() sees frames where boxes are
/// extrapolated.
class TrackRefiner {
 public:
  virtual ~TrackRefiner() = default;
  virtual void observed(const Track& track, const Image& frame) = 0;
  virtual BBox refine(const Track& track, const BBox& predicted, const Image& frame) = 0;
  virtual void forget(int track_id) = 0;
};

/// Searches integer pixel shifts within `radius` of the predicted box for the
/// best normalized cross-correlation with the grayscale patch of the last
/// observation.
std::shared_ptr<TrackRefiner> make_ncc_refiner(int radius);

class Tracker {
 public:
  explicit Tracker(TrackerOptions options = {}, std::shared_ptr<TrackRefiner> refiner = nullptr);

  /// Associates fresh detections with live tracks: candidate pairs with IoU at
  /// or above the threshold are taken greedily in descending IoU order.
  /// Unmatched detections open new tracks. Returns the detections in input
  /// order with their track ids.
  std::vector<TrackedDetection> observe(const std::vector<Detection>& detections,
                                        std::int64_t frame, const Image* pixels = nullptr);

  /// Extrapolated boxes of all live tracks at `frame`, in track id order.
  /// Predictions that leave the image entirely are omitted.
  std::vector<TrackedDetection> predict(std::int64_t frame, const Image* pixels = nullptr);

  const std::vector<Track>& tracks() const { return tracks_; }
  int next_id() const { return next_id_; }

 private:
  void expire(std::int64_t frame);

  TrackerOptions options_;
  std::shared_ptr<TrackRefiner> refiner_;
  std::vector<Track> tracks_;
  int next_id_ = 0;
};

}  // namespace maskpipe
