#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskpipe/geometry.hpp"

namespace maskpipe {

/// Rows are truth, columns are predictions.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(int classes) : counts_(Counts::Zero(classes, classes)) {}

  void add(int truth, int predicted, std::int64_t n = 1);
  int classes() const { return static_cast<int>(counts_.rows()); }
  const Counts& counts() const { return counts_; }
  std::int64_t total() const { return counts_.sum(); }
  std::int64_t truth_count(int c) const { return counts_.row(c).sum(); }
  double accuracy() const;

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.counts_ == b.counts_;
  }

 private:
  Counts counts_;
};

struct ClassCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Per-class TP/FP/FN tallies.
using DetectionCounts = std::vector<ClassCounts>;

/// Greedy matching in `ranks_before` order: a prediction is a TP when it
/// reaches `iou_threshold` with a still-unmatched truth of its class (the
/// best-overlapping one is taken); otherwise it is a FP. Leftover truths are FN.
DetectionCounts match_detections(std::span<const Detection> pred,
                                 std::span<const LabeledBox> truth, double iou_threshold,
                                 int classes);

/// Adds `b` into `a` element-wise.
void accumulate(DetectionCounts& a, const DetectionCounts& b);

/// TP/FP/FN per class read off a classification confusion matrix.
DetectionCounts counts_from_confusion(const ConfusionMatrix& m);

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when some ratio was 0/0 and reported as 0.
  bool undefined = false;
};

struct PrfReport {
  std::vector<PrfScore> per_class;
  PrfScore macro;  // unweighted mean over classes; the headline figure
  PrfScore micro;  // from pooled counts
};

PrfScore precision_recall_f1(const ClassCounts& c);
PrfReport precision_recall_f1(const DetectionCounts& counts);

struct SpeedReport {
  std::size_t images = 0;
  double wall_ms = 0.0;
  /// 100 * wall_ms / images
  double ms_per_100 = 0.0;
};

SpeedReport make_speed_report(std::size_t images, double wall_ms);

/// Times `worker` over every index in [0, images): one untimed warm-up pass,
/// then `repetitions` timed passes, reporting the median. Runs on the calling
/// thread only. Throws ConfigError for zero images or repetitions and
/// ModelError (with the image index) if the worker throws.
SpeedReport speed_bench(const std::function<void(std::size_t)>& worker, std::size_t images,
                        int repetitions = 3);

/// A results table shaped like the published comparison tables: one label
/// column followed by numeric columns. Missing cells render empty.
struct ReportTable {
  std::string label_header;
  std::vector<std::string> columns;
  /// Fixed decimals per column; missing or negative entries use the shortest
  /// round-trip form.
  std::vector<int> decimals;
  struct Row {
    std::string label;
    std::vector<std::optional<double>> values;
  };
  std::vector<Row> rows;
};

/// Table I layout: Method, Precision, F1, Speed (ms per 100 images).
struct MethodResult {
  std::string method;
  double precision = 0.0;
  double f1 = 0.0;
  std::optional<double> speed_ms_per_100;
};
ReportTable method_table(std::span<const MethodResult> rows);

/// Aligned plain-text rendering.
std::string render_text(const ReportTable& table);
/// CSV rendering with the headers given as-is (callers pick the schema).
std::string render_csv(const ReportTable& table);
/// CSV in the machine schema `method,precision,f1,speed_ms_per_100`.
std::string render_method_csv(std::span<const MethodResult> rows);

std::string confusion_csv(const ConfusionMatrix& m, std::span<const std::string> names);

/// Shortest decimal string that round-trips, or fixed `decimals` when >= 0.
std::string format_number(double v, int decimals = -1);

}  // namespace maskpipe
