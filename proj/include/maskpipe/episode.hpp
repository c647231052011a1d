#pragma once

// Episodic evaluation around the few-shot head: support sampling, querying,
// support-size sweeps, and the pretrain / finetune / query routine.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskpipe/dataset_voc.hpp"
#include "maskpipe/embedder.hpp"
#include "maskpipe/fewshot.hpp"
#include "maskpipe/labels.hpp"
#include "maskpipe/metrics.hpp"

namespace maskpipe {

/// Supports drawn per class: a fixed count, or every available sample.
struct SupportSize {
  std::optional<std::size_t> count;

  static SupportSize full() { return {}; }
  static SupportSize of(std::size_t n) { return {n}; }
  bool is_full() const { return !count.has_value(); }
  /// "50" or "full".
  std::string label() const;
  /// Accepts a positive integer or "full"; throws ConfigError otherwise.
  static SupportSize parse(const std::string& text);

  friend bool operator==(const SupportSize&, const SupportSize&) = default;
};

struct EpisodeConfig {
  SupportSize support_size = SupportSize::full();
  std::uint64_t seed = 0;
  double epsilon = 1e-3;
  fewshot::CovarianceMode covariance = fewshot::CovarianceMode::Blended;
  fewshot::DistanceMode distance = fewshot::DistanceMode::Mahalanobis;
  /// When set, the support pool is undersampled to this per-class cap first.
  std::optional<std::size_t> undersample_cap;
};

struct EmbeddingSplit {
  std::vector<LabeledEmbedding> train;       // support pool
  std::vector<LabeledEmbedding> validation;  // queries
};

struct EpisodeReport {
  SupportSize support_size;
  std::vector<std::size_t> supports_per_class;
  std::vector<std::int64_t> queries_per_class;
  std::vector<double> per_class_accuracy;
  double accuracy = 0.0;
  ConfusionMatrix confusion{0};
};

/// Samples supports, builds class statistics, classifies every validation
/// query. Throws MissingSupportError naming the class when a fixed support
/// size exceeds its pool, or when a class has no supports at all.
EpisodeReport run_episode(const EmbeddingSplit& split, const EpisodeConfig& config,
                          const LabelCatalog& labels = LabelCatalog::mask_task());

struct SweepRow {
  SupportSize support_size;
  EpisodeReport report;
};

std::vector<SweepRow> sweep_support_sizes(const EmbeddingSplit& split,
                                          std::span<const SupportSize> sizes,
                                          const EpisodeConfig& config,
                                          const LabelCatalog& labels = LabelCatalog::mask_task());

/// Rows "Simple CNAPS-<size>", one accuracy column named `column`, 4 decimals.
ReportTable sweep_table(std::span<const SweepRow> rows, const std::string& column);

/// Per-class query counts and accuracies followed by the overall figure.
std::string render_episode(const EpisodeReport& report, const LabelCatalog& labels);

using EmbeddingRefresh = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// The three-stage routine: a pretrained feature extractor is adopted, an
/// optional finetuning refresh is applied to its embeddings, and episodes are
/// queried on top.
class FewShotRoutine {
 public:
  /// Pretraining stage: adopt a fixed embedder.
  explicit FewShotRoutine(std::shared_ptr<const Embedder> pretrained);

  /// Finetuning stage: every embedding is passed through `refresh`.
  void finetune(EmbeddingRefresh refresh);

  EmbeddingSplit embed(std::span<const SliceSample> train,
                       std::span<const SliceSample> validation) const;

  /// Querying stage.
  EpisodeReport query(std::span<const SliceSample> train, std::span<const SliceSample> validation,
                      const EpisodeConfig& config,
                      const LabelCatalog& labels = LabelCatalog::mask_task()) const;

 private:
  Eigen::VectorXd embed_one(const Image& slice) const;

  std::shared_ptr<const Embedder> embedder_;
  EmbeddingRefresh refresh_;
};

}  // namespace maskpipe
