#include <cmath>
#include <random>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "maskpipe/errors.hpp"
#include "maskpipe/loss.hpp"

using namespace maskpipe;

TEST_CASE("weighted_loss examples") {
  CHECK(weighted_loss({1, 1, 1}, {1.25, 1.0}) == doctest::Approx(3.0));
  CHECK(weighted_loss({1, 1, 1}, {0.0, 3.0}) == doctest::Approx(3.0));
  CHECK(weighted_loss({2, 0, 0}, {1.25, 1.0}) == doctest::Approx(2.5));
  CHECK(weighted_loss({0.3, 0.5, 0.7}, {1.0, 1.0}) == doctest::Approx(1.5));
  CHECK(weighted_loss({0, 0, 2}, {1.25, 1.0}) == doctest::Approx(1.5));
}

TEST_CASE("weighted_loss rejects inadmissible weights") {
  CHECK_THROWS_AS(weighted_loss({1, 1, 1}, {2.0, 1.5}), ConfigError);
  CHECK_THROWS_AS(weighted_loss({1, 1, 1}, {-0.1, 1.0}), ConfigError);
  CHECK_THROWS_AS(weighted_loss({1, 1, 1}, {1.0, NAN}), ConfigError);
  CHECK_NOTHROW(weighted_loss({1, 1, 1}, {3.0, 0.0}));
}

TEST_CASE("weighted_loss coefficient identity and monotone in alpha") {
  for (double a = 0.0; a <= 3.0; a += 0.25) {
    for (double b = 0.0; a + b <= 3.0; b += 0.25) {
      CHECK(std::abs(weighted_loss({0.7, 0.7, 0.7}, {a, b}) - 2.1) < 1e-12);
    }
  }
  const LossComponents c{0.4, 0.2, 0.1};
  double prev = -1.0;
  for (double a = 0.0; a <= 2.0; a += 0.1) {
    const double v = weighted_loss(c, {a, 1.0});
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("assign_targets") {
  const AnchorSet anchors{{0.1, 0.1}, {0.4, 0.4}};
  SUBCASE("empty truth -> all negative") {
    const auto t = assign_targets({}, 4, anchors, 3);
    CHECK(t.slots.size() == 32);
    CHECK(t.positives() == 0);
    CHECK(t.collisions == 0);
  }
  SUBCASE("centre (0.25, 0.25) with S = 2 lands in cell (0, 0)") {
    const std::vector<LabeledBox> truth{{BBox::from_center(0.25, 0.25, 0.1, 0.1), 1}};
    const auto t = assign_targets(truth, 2, anchors, 3);
    CHECK(t.positives() == 1);
    REQUIRE(t.slots[0].has_value());  // cell (0, 0), small anchor
    CHECK(t.slots[0]->class_id == 1);
    CHECK(t.slots[0]->offsets.tx == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t.slots[0]->offsets.tw == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("best anchor by shape overlap") {
    const std::vector<LabeledBox> truth{{BBox::from_center(0.8, 0.3, 0.35, 0.45), 0}};
    const auto t = assign_targets(truth, 2, anchors, 3);
    // cell (0, 1), anchor 1 -> slot (0 * 2 + 1) * 2 + 1
    CHECK(t.slots[3].has_value());
  }
  SUBCASE("collision keeps the larger truth") {
    const std::vector<LabeledBox> truth{{BBox::from_center(0.2, 0.2, 0.08, 0.08), 0},
                                        {BBox::from_center(0.3, 0.3, 0.12, 0.12), 2}};
    const auto t = assign_targets(truth, 2, anchors, 3);
    CHECK(t.positives() == 1);
    CHECK(t.collisions == 1);
    CHECK(t.slots[0]->class_id == 2);
  }
  SUBCASE("zero-size truth is an annotation error") {
    const std::vector<LabeledBox> truth{{{0.2, 0.2, 0.2, 0.4}, 0}};
    CHECK_THROWS_AS(assign_targets(truth, 2, anchors, 3), InvalidAnnotationError);
  }
}

TEST_CASE("loss_components on a hand-built 1x1 grid") {
  TargetAssignment t;
  t.side = 1;
  t.boxes = 1;
  t.classes = 3;
  t.slots.resize(1);
  t.slots[0] = SlotTarget{{0, 0, 0, 0}, 0, BBox{0.25, 0.25, 0.75, 0.75}};

  GridTensor pred(1, 1, 3);
  pred.slot(0) << 0.5, -0.5, 0.1, -0.2, 0.3, 1.0, 0.0, -1.0;
  const LossComponents c = loss_components(pred, t);

  const double cls = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0 + std::exp(-1.0)));
  const double obj = std::log(1.0 + std::exp(-0.3));
  const double bbox = (0.25 + 0.25 + 0.01 + 0.04) / 4.0;
  CHECK(c.cls == doctest::Approx(cls).epsilon(1e-12));
  CHECK(c.obj == doctest::Approx(obj).epsilon(1e-12));
  CHECK(c.bbox == doctest::Approx(bbox).epsilon(1e-12));
}

TEST_CASE("loss_components limits") {
  const AnchorSet anchors{{0.1, 0.1}};
  SUBCASE("no positives: only objectness of negatives") {
    const auto t = assign_targets({}, 2, anchors, 3);
    GridTensor pred(2, 1, 3);
    for (int s = 0; s < 4; ++s) pred.slot(s)[4] = 0.1 * s;
    const LossComponents c = loss_components(pred, t);
    CHECK(c.cls == 0.0);
    CHECK(c.bbox == 0.0);
    double expected = 0.0;
    for (int s = 0; s < 4; ++s) expected += std::log(1.0 + std::exp(0.1 * s)) / 4.0;
    CHECK(c.obj == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("saturated perfect prediction -> zero") {
    const std::vector<LabeledBox> truth{{BBox::from_center(0.3, 0.6, 0.12, 0.09), 2}};
    const auto t = assign_targets(truth, 2, anchors, 3);
    GridTensor pred(2, 1, 3);
    for (int s = 0; s < 4; ++s) {
      auto slot = pred.slot(s);
      slot[4] = -40.0;
      if (const auto& target = t.slots[static_cast<std::size_t>(s)]) {
        slot.head(4) << target->offsets.tx, target->offsets.ty, target->offsets.tw,
            target->offsets.th;
        slot[4] = 40.0;
        slot.tail(3).setConstant(-40.0);
        slot[5 + target->class_id] = 40.0;
      }
    }
    const LossComponents c = loss_components(pred, t);
    CHECK(c.cls < 1e-6);
    CHECK(c.obj < 1e-6);
    CHECK(c.bbox < 1e-6);
  }
  SUBCASE("shape mismatch") {
    const auto t = assign_targets({}, 2, anchors, 3);
    CHECK_THROWS_AS(loss_components(GridTensor(3, 1, 3), t), ConfigError);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.5);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  const AnchorSet anchors{{0.3, 0.3}};
  const LossWeights w{1.25, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledBox> truth;
    for (int k = 0; k < 1 + trial % 2; ++k) {
      truth.push_back({BBox::from_center(u(rng), u(rng), 0.2 * u(rng), 0.2 * u(rng)), trial % 3});
    }
    const auto t = assign_targets(truth, 2, anchors, 3);
    GridTensor pred(2, 1, 3);
    for (Eigen::Index i = 0; i < pred.values().size(); ++i) pred.values()[i] = n(rng);

    const LossEvaluation eval = evaluate_loss(pred, t, w);
    const auto f = [&](const Eigen::VectorXd& x) {
      GridTensor g = pred;
      g.values() = x;
      return weighted_loss(loss_components(g, t), w);
    };
    const Eigen::VectorXd fd = oracle::central_difference(f, pred.values(), 1e-5);
    CHECK(oracle::max_relative_error(eval.gradient.values(), fd) < 1e-4);
    CHECK(eval.total == doctest::Approx(f(pred.values())).epsilon(1e-14));
  }
}

TEST_CASE("decoding assigned targets reproduces the truths") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const AnchorSet anchors = default_anchors();
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<LabeledBox> truth{
        {BBox::from_center(u(rng), u(rng), 0.1 * u(rng), 0.1 * u(rng)), trial % 3}};
    const auto t = assign_targets(truth, 8, anchors, 3);
    GridTensor pred(8, 2, 3);
    for (int s = 0; s < pred.slots(); ++s) pred.slot(s)[4] = -40.0;
    for (int s = 0; s < pred.slots(); ++s) {
      if (const auto& target = t.slots[static_cast<std::size_t>(s)]) {
        auto slot = pred.slot(s);
        slot.head(4) << target->offsets.tx, target->offsets.ty, target->offsets.tw,
            target->offsets.th;
        slot[4] = 40.0;
        slot[5 + target->class_id] = 40.0;
      }
    }
    const auto dets = decode_grid(pred, anchors, {0.5, 0.5});
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].class_id == truth[0].class_id);
    CHECK(std::abs(dets[0].box.x1 - truth[0].box.x1) < 1e-6);
    CHECK(std::abs(dets[0].box.y1 - truth[0].box.y1) < 1e-6);
    CHECK(std::abs(dets[0].box.x2 - truth[0].box.x2) < 1e-6);
    CHECK(std::abs(dets[0].box.y2 - truth[0].box.y2) < 1e-6);
  }
}
