#pragma once

#include <span>
#include <vector>

namespace maskpipe {

/// Axis-aligned box in normalized image coordinates. (x1, y1) is the top-left
/// corner and (x2, y2) the bottom-right one; y grows downward.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox box;
  double confidence = 0.0;
  int class_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// A ground-truth box with its class.
struct LabeledBox {
  BBox box;
  int class_id = 0;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

/// True when `b` is ordered, finite and inside the unit square.
bool is_valid(const BBox& b);

/// Intersection over union; 0 when the union has zero area.
double iou(const BBox& a, const BBox& b);

/// Clamps every coordinate to [0, 1] and restores corner ordering.
/// Throws InvalidGeometryError on non-finite input.
BBox clip_to_unit(const BBox& b);

/// Strict weak order used everywhere detections are ranked: descending
/// confidence, then ascending class id, then lexicographic box coordinates.
bool ranks_before(const Detection& a, const Detection& b);

/// Greedy non-maximum suppression. A detection is dropped when its IoU with an
/// already-kept detection exceeds `iou_threshold` (and, when `class_aware`,
/// the two share a class). Output is ordered by `ranks_before`.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           bool class_aware = true);

}  // namespace maskpipe
