#include "maskpipe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "maskpipe/errors.hpp"

namespace maskpipe {

bool is_valid(const BBox& b) {
  const auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return in_unit(b.x1) && in_unit(b.y1) && in_unit(b.x2) && in_unit(b.y2) && b.x1 <= b.x2 &&
         b.y1 <= b.y2;
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clip_to_unit(const BBox& b) {
  if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) ||
      !std::isfinite(b.y2)) {
    throw InvalidGeometryError("box has non-finite coordinates");
  }
  const auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
  BBox out{c(b.x1), c(b.y1), c(b.x2), c(b.y2)};
  if (out.x1 > out.x2) std::swap(out.x1, out.x2);
  if (out.y1 > out.y2) std::swap(out.y1, out.y2);
  return out;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return std::tie(a.class_id, a.box.x1, a.box.y1, a.box.x2, a.box.y2) <
         std::tie(b.class_id, b.box.x1, b.box.y1, b.box.x2, b.box.y2);
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           bool class_aware) {
  std::vector<Detection> order(dets.begin(), dets.end());
  std::stable_sort(order.begin(), order.end(), ranks_before);

  std::vector<Detection> kept;
  kept.reserve(order.size());
  for (const Detection& cand : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      if (class_aware && k.class_id != cand.class_id) return false;
      return iou(k.box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace maskpipe
