#include "maskpipe/yolo_head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maskpipe/errors.hpp"

namespace maskpipe {

namespace {

constexpr double kBorderEps = 1e-9;

void check_threshold(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(value));
  }
}

}  // namespace

AnchorSet default_anchors() { return {{0.05, 0.07}, {0.14, 0.18}}; }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

Detection decode_cell(const Eigen::Ref<const Eigen::VectorXd>& raw, GridCell cell, int side,
                      const Anchor& anchor) {
  if (!raw.allFinite()) {
    throw DecodeError("non-finite raw value in cell (" + std::to_string(cell.row) + ", " +
                      std::to_string(cell.col) + ")");
  }
  if (side < 1 || anchor.width <= 0.0 || anchor.height <= 0.0) {
    throw ConfigError("decode needs side >= 1 and a positive anchor");
  }
  const double cx = (cell.col + sigmoid(raw[0])) / side;
  const double cy = (cell.row + sigmoid(raw[1])) / side;
  const double w = anchor.width * std::exp(raw[2]);
  const double h = anchor.height * std::exp(raw[3]);

  Detection det;
  det.box = clip_to_unit(BBox::from_center(cx, cy, w, h));
  const auto classes = raw.tail(raw.size() - 5);
  Eigen::Index best = 0;
  if (classes.size() > 0) {
    classes.maxCoeff(&best);
    det.confidence = sigmoid(raw[4]) * softmax(classes)[best];
  } else {
    det.confidence = sigmoid(raw[4]);
  }
  det.class_id = static_cast<int>(best);
  return det;
}

BoxOffsets encode_box(const BBox& box, GridCell cell, int side, const Anchor& anchor) {
  const double ox = std::clamp(box.center_x() * side - cell.col, kBorderEps, 1.0 - kBorderEps);
  const double oy = std::clamp(box.center_y() * side - cell.row, kBorderEps, 1.0 - kBorderEps);
  return {logit(ox), logit(oy), std::log(box.width() / anchor.width),
          std::log(box.height() / anchor.height)};
}

GridCell cell_of(double x, double y, int side) {
  const auto index = [side](double v) {
    return std::clamp(static_cast<int>(std::floor(v * side)), 0, side - 1);
  };
  return {index(y), index(x)};
}

std::vector<Detection> decode_grid(const GridTensor& grid, const AnchorSet& anchors,
                                   const DecodeOptions& options) {
  check_threshold(options.conf_threshold, "conf_threshold");
  check_threshold(options.iou_threshold, "iou_threshold");
  if (static_cast<int>(anchors.size()) != grid.boxes()) {
    throw ConfigError("grid has " + std::to_string(grid.boxes()) + " boxes per cell but " +
                      std::to_string(anchors.size()) + " anchors were given");
  }

  std::vector<Detection> candidates;
  for (int row = 0; row < grid.side(); ++row) {
    for (int col = 0; col < grid.side(); ++col) {
      for (int b = 0; b < grid.boxes(); ++b) {
        const auto raw = grid.values().segment(grid.offset(row, col, b), grid.channels());
        Detection det = decode_cell(raw, {row, col}, grid.side(), anchors[b]);
        if (det.confidence >= options.conf_threshold) candidates.push_back(det);
      }
    }
  }
  return nms(candidates, options.iou_threshold, options.class_aware);
}

}  // namespace maskpipe
