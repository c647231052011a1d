#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "maskpipe/geometry.hpp"
#include "maskpipe/grid_tensor.hpp"
#include "maskpipe/yolo_head.hpp"

namespace maskpipe {

/// Weights of L = alpha * L_cls + beta * L_obj + (3 - alpha - beta) * L_bbox.
struct LossWeights {
  double alpha = 1.25;
  double beta = 1.0;

  double bbox_coefficient() const { return 3.0 - alpha - beta; }
  /// Throws ConfigError unless alpha, beta >= 0 and alpha + beta <= 3.
  void validate() const;
};

/// Mean-reduced loss terms, each over its own support.
struct LossComponents {
  double cls = 0.0;
  double obj = 0.0;
  double bbox = 0.0;
};

struct SlotTarget {
  BoxOffsets offsets;
  int class_id = 0;
  BBox truth;
};

/// Training targets for every (cell, box) slot of a grid, in the same slot
/// order as GridTensor. Empty slots are negatives (objectness 0).
struct TargetAssignment {
  int side = 0;
  int boxes = 0;
  int classes = 0;
  std::vector<std::optional<SlotTarget>> slots;
  /// Truths dropped because a larger truth claimed the same slot.
  int collisions = 0;

  int positives() const;
};

/// Places each truth in the cell holding its centre, on the anchor whose
/// shape overlaps it best, with targets from the inverse decode transform.
/// When two truths claim one slot the larger one wins. Throws
/// InvalidAnnotationError for zero-width or zero-height truths.
TargetAssignment assign_targets(std::span<const LabeledBox> truth, int side,
                                const AnchorSet& anchors, int classes);

/// cls: cross-entropy of the class logits on positive slots.
/// obj: binary cross-entropy of the objectness logit on every slot.
/// bbox: squared error of (tx, ty, tw, th) averaged over the 4 * positives entries.
/// Empty supports give 0. Throws ConfigError on shape mismatch.
LossComponents loss_components(const GridTensor& pred, const TargetAssignment& targets);

double weighted_loss(const LossComponents& c, const LossWeights& w);

struct LossEvaluation {
  LossComponents components;
  double total = 0.0;
  /// d total / d pred, same shape as the prediction grid.
  GridTensor gradient;
};

/// Loss value plus its analytic gradient with respect to every grid entry.
LossEvaluation evaluate_loss(const GridTensor& pred, const TargetAssignment& targets,
                             const LossWeights& weights);

struct GradientCheckReport {
  int grids = 0;
  std::size_t entries = 0;
  /// max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
  double max_relative_error = 0.0;
};

/// Compares evaluate_loss against central differences with step `step` on
/// `grids` random 2x2 grids with one box slot, three classes and one or two
/// truths each.
GradientCheckReport gradient_check(const LossWeights& weights, int grids, std::uint64_t seed,
                                   double step = 1e-5);

}  // namespace maskpipe
