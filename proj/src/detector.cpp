#include "maskpipe/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "maskpipe/errors.hpp"
#include "maskpipe/grid_tensor.hpp"
#include "maskpipe/labels.hpp"
#include "maskpipe/rng.hpp"

namespace maskpipe {
namespace {

constexpr std::uint8_t kMarkers[3][3] = {{30, 170, 70}, {170, 30, 70}, {210, 170, 20}};

int marker_class(const std::uint8_t* px) {
  for (int c = 0; c < 3; ++c) {
    if (std::equal(px, px + 3, kMarkers[c])) return c;
  }
  return -1;
}

}  // namespace

const std::uint8_t* marker_color(int class_id) {
  if (class_id < 0 || class_id > 2) {
    throw InvalidGeometryError("no marker colour for class " + std::to_string(class_id));
  }
  return kMarkers[class_id];
}

PixelRect raster_rect(const BBox& box, int w, int h) {
  const auto px = [](double v, int n) {
    return std::clamp(static_cast<int>(std::floor(v * n)), 0, n);
  };
  return {px(box.x1, w), px(box.y1, h), px(box.x2, w), px(box.y2, h)};
}

BBox object_box(const SceneObject& object, std::uint64_t frame_index) {
  const double t = static_cast<double>(frame_index);
  return {object.start.x1 + object.vx * t, object.start.y1 + object.vy * t,
          object.start.x2 + object.vx * t, object.start.y2 + object.vy * t};
}

Image render_scene_frame(const SceneSpec& spec, std::uint64_t frame_index) {
  Image img(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const auto v = static_cast<std::uint8_t>(60 + (x + 2 * y) % 64);
      std::uint8_t* p = img.at(x, y);
      p[0] = p[1] = p[2] = v;
    }
  }
  for (const auto& obj : spec.objects) {
    const PixelRect r = raster_rect(object_box(obj, frame_index), spec.width, spec.height);
    const std::uint8_t* color = marker_color(obj.class_id);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) std::copy(color, color + 3, img.at(x, y));
    }
  }
  return img;
}

SceneSpec random_scene(std::uint64_t seed, int width, int height, std::uint64_t frames,
                       int count) {
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.frame_count = frames;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    SceneObject obj;
    obj.class_id = static_cast<int>(uniform_below(rng, 3));
    const double w = 0.08 + 0.12 * uniform_unit(rng);
    const double h = 0.08 + 0.12 * uniform_unit(rng);
    const double x = (1.0 - w) * uniform_unit(rng);
    const double y = (1.0 - h) * uniform_unit(rng);
    obj.start = {x, y, x + w, y + h};
    obj.vx = (uniform_unit(rng) - 0.5) * 0.01;
    obj.vy = (uniform_unit(rng) - 0.5) * 0.01;
    spec.objects.push_back(obj);
  }
  return spec;
}

SceneSource::SceneSource(SceneSpec spec) : spec_(std::move(spec)) {
  info_ = {static_cast<std::uint32_t>(spec_.width), static_cast<std::uint32_t>(spec_.height),
           spec_.fps_num, spec_.fps_den, spec_.frame_count};
}

bool SceneSource::next(Image& frame) {
  if (pos_ == spec_.frame_count) return false;
  frame = render_scene_frame(spec_, pos_++);
  return true;
}

SyntheticDetector::SyntheticDetector(int min_pixels)
    : labels_(LabelCatalog::mask_task().names()), min_pixels_(min_pixels) {}

std::vector<Detection> SyntheticDetector::detect(const Image& frame, std::uint64_t) {
  const int w = frame.width;
  const int h = frame.height;
  std::vector<int> cls(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) cls[static_cast<std::size_t>(y) * w + x] = marker_class(frame.at(x, y));
  }
  std::vector<char> seen(cls.size(), 0);
  std::vector<int> stack;
  std::vector<Detection> out;
  for (std::size_t start = 0; start < cls.size(); ++start) {
    if (cls[start] < 0 || seen[start]) continue;
    const int c = cls[start];
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    long pixels = 0;
    stack.assign(1, static_cast<int>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int x = i % w;
      const int y = i / w;
      ++pixels;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
        const int j = n[1] * w + n[0];
        if (seen[static_cast<std::size_t>(j)] || cls[static_cast<std::size_t>(j)] != c) continue;
        seen[static_cast<std::size_t>(j)] = 1;
        stack.push_back(j);
      }
    }
    if (pixels < min_pixels_) continue;
    const double box_pixels = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
    out.push_back({{static_cast<double>(x0) / w, static_cast<double>(y0) / h,
                    static_cast<double>(x1 + 1) / w, static_cast<double>(y1 + 1) / h},
                   static_cast<double>(pixels) / box_pixels,
                   c});
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

PlaybackDetector::PlaybackDetector(std::filesystem::path dir, AnchorSet anchors,
                                   DecodeOptions options, std::vector<std::string> labels)
    : dir_(std::move(dir)),
      anchors_(std::move(anchors)),
      options_(options),
      labels_(std::move(labels)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw IoError("playback directory " + dir_.string() + " does not exist");
  }
}

std::string PlaybackDetector::file_name(std::uint64_t frame_index) {
  char name[32];
  std::snprintf(name, sizeof name, "%06llu.mgrd", static_cast<unsigned long long>(frame_index));
  return name;
}

std::vector<Detection> PlaybackDetector::detect(const Image&, std::uint64_t frame_index) {
  const auto path = dir_ / file_name(frame_index);
  if (!std::filesystem::exists(path)) {
    throw ModelError("frame " + std::to_string(frame_index) + ": no recorded output " +
                     path.string());
  }
  const GridTensor grid = read_grid_file(path);
  if (grid.classes() != static_cast<int>(labels_.size())) {
    throw ModelError("frame " + std::to_string(frame_index) + ": grid has " +
                     std::to_string(grid.classes()) + " classes but " +
                     std::to_string(labels_.size()) + " labels were declared");
  }
  return decode_grid(grid, anchors_, options_);
}

FixedCostModel::FixedCostModel(std::chrono::nanoseconds cost, std::shared_ptr<DetectorModel> inner)
    : cost_(cost), inner_(std::move(inner)), labels_(LabelCatalog::mask_task().names()) {}

const std::vector<std::string>& FixedCostModel::labels() const {
  return inner_ ? inner_->labels() : labels_;
}

std::vector<Detection> FixedCostModel::detect(const Image& frame, std::uint64_t frame_index) {
  const auto until = std::chrono::steady_clock::now() + cost_;
  while (std::chrono::steady_clock::now() < until) {
  }
  return inner_ ? inner_->detect(frame, frame_index) : std::vector<Detection>{};
}

}  // namespace maskpipe
