#include "maskpipe/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maskpipe/errors.hpp"
#include "maskpipe/rng.hpp"

namespace maskpipe {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double bce_with_logit(double z, double y) { return softplus(z) - z * y; }

double log_softmax_at(const Eigen::Ref<const Eigen::VectorXd>& logits, Eigen::Index k) {
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return logits[k] - lse;
}

double shape_iou(double w, double h, const Anchor& a) {
  const double inter = std::min(w, a.width) * std::min(h, a.height);
  return inter / (w * h + a.width * a.height - inter);
}

void check_shapes(const GridTensor& pred, const TargetAssignment& targets) {
  if (pred.side() != targets.side || pred.boxes() != targets.boxes ||
      pred.classes() != targets.classes ||
      static_cast<int>(targets.slots.size()) != pred.slots()) {
    throw ConfigError("prediction grid shape does not match the target assignment");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta <= 3.0)) {
    throw ConfigError("loss weights need alpha >= 0, beta >= 0 and alpha + beta <= 3 (got alpha=" +
                      std::to_string(alpha) + " beta=" + std::to_string(beta) + ")");
  }
}

int TargetAssignment::positives() const {
  return static_cast<int>(std::count_if(slots.begin(), slots.end(),
                                        [](const auto& s) { return s.has_value(); }));
}

TargetAssignment assign_targets(std::span<const LabeledBox> truth, int side,
                                const AnchorSet& anchors, int classes) {
  if (side < 1 || anchors.empty()) throw ConfigError("assign_targets needs side >= 1 and anchors");
  TargetAssignment out;
  out.side = side;
  out.boxes = static_cast<int>(anchors.size());
  out.classes = classes;
  out.slots.resize(static_cast<std::size_t>(side) * side * anchors.size());

  for (const LabeledBox& t : truth) {
    if (!(t.box.width() > 0.0) || !(t.box.height() > 0.0)) {
      throw InvalidAnnotationError("truth box has zero width or height");
    }
    if (t.class_id < 0 || t.class_id >= classes) {
      throw InvalidAnnotationError("truth class id " + std::to_string(t.class_id) +
                                   " outside [0, " + std::to_string(classes) + ")");
    }
    const GridCell cell = cell_of(t.box.center_x(), t.box.center_y(), side);
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double v = shape_iou(t.box.width(), t.box.height(), anchors[a]);
      if (v > best_iou) {
        best_iou = v;
        best = a;
      }
    }
    const std::size_t index =
        (static_cast<std::size_t>(cell.row) * side + cell.col) * anchors.size() + best;
    auto& slot = out.slots[index];
    SlotTarget target{encode_box(t.box, cell, side, anchors[best]), t.class_id, t.box};
    if (slot) {
      ++out.collisions;
      if (t.box.area() > slot->truth.area()) slot = target;
    } else {
      slot = target;
    }
  }
  return out;
}

LossComponents loss_components(const GridTensor& pred, const TargetAssignment& targets) {
  return evaluate_loss(pred, targets, LossWeights{1.0, 1.0}).components;
}

double weighted_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  return w.alpha * c.cls + w.beta * c.obj + w.bbox_coefficient() * c.bbox;
}

LossEvaluation evaluate_loss(const GridTensor& pred, const TargetAssignment& targets,
                             const LossWeights& weights) {
  weights.validate();
  check_shapes(pred, targets);

  LossEvaluation out;
  out.gradient = GridTensor(pred.side(), pred.boxes(), pred.classes());
  const int slots = pred.slots();
  const int positives = targets.positives();
  const double obj_scale = slots > 0 ? 1.0 / slots : 0.0;
  const double cls_scale = positives > 0 ? 1.0 / positives : 0.0;
  const double bbox_scale = positives > 0 ? 1.0 / (4.0 * positives) : 0.0;

  for (int s = 0; s < slots; ++s) {
    const auto raw = pred.slot(s);
    auto grad = out.gradient.slot(s);
    const auto& target = targets.slots[static_cast<std::size_t>(s)];
    const double y = target ? 1.0 : 0.0;
    const double z = raw[GridTensor::kObjectness];

    out.components.obj += obj_scale * bce_with_logit(z, y);
    grad[GridTensor::kObjectness] += weights.beta * obj_scale * (sigmoid(z) - y);

    if (!target) continue;

    const auto logits = raw.tail(pred.classes());
    out.components.cls -= cls_scale * log_softmax_at(logits, target->class_id);
    Eigen::VectorXd dcls = softmax(logits);
    dcls[target->class_id] -= 1.0;
    grad.tail(pred.classes()) += weights.alpha * cls_scale * dcls;

    const double goal[4] = {target->offsets.tx, target->offsets.ty, target->offsets.tw,
                            target->offsets.th};
    for (int k = 0; k < 4; ++k) {
      const double r = raw[k] - goal[k];
      out.components.bbox += bbox_scale * r * r;
      grad[k] += weights.bbox_coefficient() * bbox_scale * 2.0 * r;
    }
  }
  out.total = weighted_loss(out.components, weights);
  return out;
}

GradientCheckReport gradient_check(const LossWeights& weights, int grids, std::uint64_t seed,
                                   double step) {
  weights.validate();
  if (grids < 1) throw ConfigError("gradient check needs at least one grid");
  if (!(step > 0)) throw ConfigError("finite-difference step must be positive");
  std::mt19937_64 rng(seed);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * uniform_unit(rng); };
  const AnchorSet anchors{{0.3, 0.3}};
  GradientCheckReport report;
  report.grids = grids;
  for (int g = 0; g < grids; ++g) {
    std::vector<LabeledBox> truth;
    const int count = 1 + static_cast<int>(uniform_below(rng, 2));
    for (int k = 0; k < count; ++k) {
      const double cx = uniform(0.1, 0.9);
      const double cy = uniform(0.1, 0.9);
      const double w = uniform(0.02, 0.2);
      const double h = uniform(0.02, 0.2);
      truth.push_back({BBox::from_center(cx, cy, w, h), static_cast<int>(uniform_below(rng, 3))});
    }
    const TargetAssignment targets = assign_targets(truth, 2, anchors, 3);
    GridTensor pred(2, 1, 3);
    for (Eigen::Index i = 0; i < pred.values().size(); ++i) pred.values()[i] = uniform(-3.0, 3.0);

    const LossEvaluation eval = evaluate_loss(pred, targets, weights);
    GridTensor probe = pred;
    for (Eigen::Index i = 0; i < pred.values().size(); ++i) {
      const double keep = pred.values()[i];
      probe.values()[i] = keep + step;
      const double up = weighted_loss(loss_components(probe, targets), weights);
      probe.values()[i] = keep - step;
      const double down = weighted_loss(loss_components(probe, targets), weights);
      probe.values()[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = eval.gradient.values()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      report.max_relative_error =
          std::max(report.max_relative_error, std::abs(analytic - numeric) / denom);
      ++report.entries;
    }
  }
  return report;
}

}  // namespace maskpipe
