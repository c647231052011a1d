#include "maskpipe/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "maskpipe/errors.hpp"

namespace maskpipe {
namespace {

struct Patch {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

double gray(const Image& img, int x, int y) {
  const std::uint8_t* p = img.at(x, y);
  return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
}

PixelRect pixel_box(const BBox& b, int w, int h) {
  return {static_cast<int>(std::lround(b.x1 * w)), static_cast<int>(std::lround(b.y1 * h)),
          static_cast<int>(std::lround(b.x2 * w)), static_cast<int>(std::lround(b.y2 * h))};
}

bool inside(const PixelRect& r, const Image& img) {
  return r.x0 >= 0 && r.y0 >= 0 && r.x1 <= img.width && r.y1 <= img.height && r.width() > 0 &&
         r.height() > 0;
}

class NccRefiner : public TrackRefiner {
 public:
  explicit NccRefiner(int radius) : radius_(radius) {}

  void observed(const Track& track, const Image& frame) override {
    const PixelRect r = pixel_box(track.box, frame.width, frame.height);
    if (!inside(r, frame)) {
      patches_.erase(track.id);
      return;
    }
    Patch p{r.width(), r.height(), {}};
    p.values.reserve(static_cast<std::size_t>(r.width()) * r.height());
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) p.values.push_back(gray(frame, x, y));
    }
    patches_[track.id] = std::move(p);
  }

  BBox refine(const Track& track, const BBox& predicted, const Image& frame) override {
    const auto it = patches_.find(track.id);
    if (it == patches_.end()) return predicted;
    const Patch& patch = it->second;
    const PixelRect base = pixel_box(predicted, frame.width, frame.height);
    double best = -2.0;
    int best_dx = 0, best_dy = 0;
    for (int dy = -radius_; dy <= radius_; ++dy) {
      for (int dx = -radius_; dx <= radius_; ++dx) {
        const PixelRect r{base.x0 + dx, base.y0 + dy, base.x0 + dx + patch.width,
                          base.y0 + dy + patch.height};
        if (!inside(r, frame)) continue;
        const double score = ncc(patch, frame, r.x0, r.y0);
        const auto key = std::make_tuple(std::abs(dx) + std::abs(dy), dy, dx);
        const auto best_key = std::make_tuple(std::abs(best_dx) + std::abs(best_dy), best_dy, best_dx);
        if (score > best + 1e-12 || (std::abs(score - best) <= 1e-12 && key < best_key)) {
          best = score;
          best_dx = dx;
          best_dy = dy;
        }
      }
    }
    if (best < -1.5) return predicted;
    const double sx = static_cast<double>(base.x0 + best_dx) / frame.width - predicted.x1;
    const double sy = static_cast<double>(base.y0 + best_dy) / frame.height - predicted.y1;
    return {predicted.x1 + sx, predicted.y1 + sy, predicted.x2 + sx, predicted.y2 + sy};
  }

  void forget(int track_id) override { patches_.erase(track_id); }

 private:
  static double ncc(const Patch& p, const Image& img, int x0, int y0) {
    const double n = static_cast<double>(p.values.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::size_t k = 0;
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        const double a = p.values[k++];
        const double b = gray(img, x0 + x, y0 + y);
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
      }
    }
    const double cov = sab - sa * sb / n;
    const double va = saa - sa * sa / n;
    const double vb = sbb - sb * sb / n;
    if (va <= 1e-9 || vb <= 1e-9) return va <= 1e-9 && vb <= 1e-9 ? 1.0 : 0.0;
    return cov / std::sqrt(va * vb);
  }

  int radius_;
  std::map<int, Patch> patches_;
};

}  // namespace

BBox Track::velocity() const {
  if (!previous_box || last_seen == previous_seen) return {0, 0, 0, 0};
  const double dt = static_cast<double>(last_seen - previous_seen);
  return {(box.x1 - previous_box->x1) / dt, (box.y1 - previous_box->y1) / dt,
          (box.x2 - previous_box->x2) / dt, (box.y2 - previous_box->y2) / dt};
}

BBox Track::predict(std::int64_t frame) const {
  const BBox v = velocity();
  const double dt = static_cast<double>(frame - last_seen);
  return {box.x1 + v.x1 * dt, box.y1 + v.y1 * dt, box.x2 + v.x2 * dt, box.y2 + v.y2 * dt};
}

std::shared_ptr<TrackRefiner> make_ncc_refiner(int radius) {
  if (radius < 0) throw ConfigError("refiner search radius must be >= 0");
  return std::make_shared<NccRefiner>(radius);
}

Tracker::Tracker(TrackerOptions options, std::shared_ptr<TrackRefiner> refiner)
    : options_(options), refiner_(std::move(refiner)) {
  if (!(options_.iou_threshold >= 0.0 && options_.iou_threshold <= 1.0)) {
    throw ConfigError("tracker IoU threshold must lie in [0, 1]");
  }
  if (options_.max_age < 0) throw ConfigError("tracker max_age must be >= 0");
}

void Tracker::expire(std::int64_t frame) {
  std::erase_if(tracks_, [&](const Track& t) {
    const bool stale = frame - t.last_seen > options_.max_age;
    if (stale && refiner_) refiner_->forget(t.id);
    return stale;
  });
}

std::vector<TrackedDetection> Tracker::observe(const std::vector<Detection>& detections,
                                               std::int64_t frame, const Image* pixels) {
  expire(frame);
  struct Candidate {
    double overlap;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const double o = iou(tracks_[t].predict(frame), detections[d].box);
      if (o >= options_.iou_threshold && o > 0.0) candidates.push_back({o, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (tracks_[a.track].id != tracks_[b.track].id) return tracks_[a.track].id < tracks_[b.track].id;
    return a.det < b.det;
  });

  std::vector<TrackedDetection> out(detections.size());
  std::vector<char> track_used(tracks_.size(), 0);
  std::vector<char> det_used(detections.size(), 0);
  for (const auto& c : candidates) {
    if (track_used[c.track] || det_used[c.det]) continue;
    track_used[c.track] = det_used[c.det] = 1;
    Track& t = tracks_[c.track];
    const Detection& d = detections[c.det];
    t.previous_box = t.box;
    t.previous_seen = t.last_seen;
    t.box = d.box;
    t.last_seen = frame;
    t.class_id = d.class_id;
    t.confidence = d.confidence;
    ++t.hits;
    out[c.det] = {d, t.id};
  }
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (det_used[d]) continue;
    Track t;
    t.id = next_id_++;
    t.class_id = detections[d].class_id;
    t.confidence = detections[d].confidence;
    t.box = detections[d].box;
    t.last_seen = frame;
    t.hits = 1;
    tracks_.push_back(t);
    out[d] = {detections[d], t.id};
  }
  if (refiner_ && pixels) {
    for (const auto& t : tracks_) {
      if (t.last_seen == frame) refiner_->observed(t, *pixels);
    }
  }
  return out;
}

std::vector<TrackedDetection> Tracker::predict(std::int64_t frame, const Image* pixels) {
  expire(frame);
  std::vector<TrackedDetection> out;
  for (const auto& t : tracks_) {
    BBox b = t.predict(frame);
    if (refiner_ && pixels) b = refiner_->refine(t, b, *pixels);
    if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) ||
        !std::isfinite(b.y2)) {
      continue;
    }
    const BBox clipped = clip_to_unit(b);
    if (clipped.area() <= 0.0) continue;
    out.push_back({{clipped, t.confidence, t.class_id}, t.id});
  }
  std::sort(out.begin(), out.end(), [](const TrackedDetection& a, const TrackedDetection& b) {
    return *a.track_id < *b.track_id;
  });
  return out;
}

}  // namespace maskpipe
