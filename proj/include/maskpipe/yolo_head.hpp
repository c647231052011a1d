#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "maskpipe/geometry.hpp"
#include "maskpipe/grid_tensor.hpp"

namespace maskpipe {

/// Prior box size in normalized image units.
struct Anchor {
  double width = 0.0;
  double height = 0.0;
};

/// One anchor per box slot of a cell.
using AnchorSet = std::vector<Anchor>;

/// Grid side used when nothing else is configured: a 512 px input at stride 32.
inline constexpr int kDefaultGridSide = 16;

/// Default anchors for B = 2 boxes per cell (a small and a larger face prior).
AnchorSet default_anchors();

struct GridCell {
  int row = 0;
  int col = 0;
};

/// Sampled box parameters in the network's raw (pre-activation) space.
struct BoxOffsets {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
};

double sigmoid(double x);
double logit(double p);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// Decodes one box slot (tx, ty, tw, th, objectness, class logits...).
/// The centre is (col + sigmoid(tx)) / S, (row + sigmoid(ty)) / S, the size is
/// the anchor scaled by exp(tw), exp(th). Confidence is
/// sigmoid(objectness) * max softmax(class logits).
/// Throws DecodeError naming the cell when any raw value is non-finite.
Detection decode_cell(const Eigen::Ref<const Eigen::VectorXd>& raw, GridCell cell, int side,
                      const Anchor& anchor);

/// Inverse of the decode transform for a box centred in `cell`. Offsets that
/// land exactly on a cell border are pulled 1e-9 inside so the logit stays finite.
BoxOffsets encode_box(const BBox& box, GridCell cell, int side, const Anchor& anchor);

/// The cell containing a normalized point.
GridCell cell_of(double x, double y, int side);

struct DecodeOptions {
  double conf_threshold = 0.25;
  double iou_threshold = 0.45;
  bool class_aware = true;
};

/// Decodes every cell and box, keeps detections with confidence at or above
/// the threshold and runs NMS. Throws ConfigError when the anchor count does
/// not match the grid or a threshold lies outside [0, 1].
std::vector<Detection> decode_grid(const GridTensor& grid, const AnchorSet& anchors,
                                   const DecodeOptions& options = {});

}  // namespace maskpipe
