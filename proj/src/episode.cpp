#include "maskpipe/episode.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "maskpipe/errors.hpp"

namespace maskpipe {

std::string SupportSize::label() const { return count ? std::to_string(*count) : "full"; }

SupportSize SupportSize::parse(const std::string& text) {
  if (text == "full") return full();
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != text.size() || v <= 0) {
    throw ConfigError("support size must be a positive integer or \"full\", got \"" + text + "\"");
  }
  return of(static_cast<std::size_t>(v));
}

namespace {

std::vector<const LabeledEmbedding*> pool_for(std::span<const LabeledEmbedding> items,
                                              const EpisodeConfig& config) {
  std::vector<const LabeledEmbedding*> out;
  if (config.undersample_cap) {
    std::vector<int> ids;
    for (const auto& e : items) ids.push_back(e.class_id);
    for (std::size_t i : undersample_indices(ids, *config.undersample_cap, config.seed)) {
      out.push_back(&items[i]);
    }
  } else {
    for (const auto& e : items) out.push_back(&e);
  }
  return out;
}

}  // namespace

EpisodeReport run_episode(const EmbeddingSplit& split, const EpisodeConfig& config,
                          const LabelCatalog& labels) {
  const int classes = labels.size();
  const auto pool = pool_for(split.train, config);

  std::vector<std::vector<const LabeledEmbedding*>> by_class(static_cast<std::size_t>(classes));
  Eigen::Index dim = -1;
  for (const auto* e : pool) {
    if (e->class_id < 0 || e->class_id >= classes) {
      throw DimensionError("support class id " + std::to_string(e->class_id) + " out of range");
    }
    if (dim < 0) dim = e->vector.size();
    if (e->vector.size() != dim) throw DimensionError("support embeddings differ in dimension");
    by_class[static_cast<std::size_t>(e->class_id)].push_back(e);
  }

  EpisodeReport report;
  report.support_size = config.support_size;
  report.confusion = ConfusionMatrix(classes);

  std::mt19937_64 engine(config.seed);
  std::vector<fewshot::SupportSet<double>> supports;
  for (int c = 0; c < classes; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) {
      throw MissingSupportError("class \"" + labels.display_name(c) + "\" has no support samples");
    }
    std::vector<std::size_t> chosen;
    if (config.support_size.is_full()) {
      chosen.resize(members.size());
      for (std::size_t i = 0; i < members.size(); ++i) chosen[i] = i;
    } else {
      const std::size_t want = *config.support_size.count;
      if (want > members.size()) {
        throw MissingSupportError("support size " + std::to_string(want) + " exceeds the " +
                                  std::to_string(members.size()) + " training samples of class \"" +
                                  labels.display_name(c) + "\"");
      }
      chosen = sample_indices(members.size(), want, engine);
    }
    fewshot::SupportSet<double> set{c, Eigen::MatrixXd(static_cast<Eigen::Index>(chosen.size()), dim)};
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      set.samples.row(static_cast<Eigen::Index>(i)) = members[chosen[i]]->vector.transpose();
    }
    report.supports_per_class.push_back(chosen.size());
    supports.push_back(std::move(set));
  }

  const auto stats = fewshot::class_statistics<double>(supports, config.epsilon, config.covariance);

  Eigen::MatrixXd queries(static_cast<Eigen::Index>(split.validation.size()), dim);
  for (std::size_t i = 0; i < split.validation.size(); ++i) {
    const auto& q = split.validation[i];
    if (q.vector.size() != dim) throw DimensionError("query embedding dimension mismatch");
    if (q.class_id < 0 || q.class_id >= classes) throw DimensionError("query class id out of range");
    queries.row(static_cast<Eigen::Index>(i)) = q.vector.transpose();
  }
  const auto predictions = fewshot::classify<double>(queries, stats, config.distance);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    report.confusion.add(split.validation[i].class_id, predictions[i].class_id);
  }

  for (int c = 0; c < classes; ++c) {
    const std::int64_t n = report.confusion.truth_count(c);
    report.queries_per_class.push_back(n);
    report.per_class_accuracy.push_back(
        n == 0 ? 0.0 : static_cast<double>(report.confusion.counts()(c, c)) / static_cast<double>(n));
  }
  report.accuracy = report.confusion.accuracy();
  return report;
}

std::vector<SweepRow> sweep_support_sizes(const EmbeddingSplit& split,
                                          std::span<const SupportSize> sizes,
                                          const EpisodeConfig& config, const LabelCatalog& labels) {
  if (sizes.empty()) throw ConfigError("support-size sweep needs at least one size");
  std::vector<SweepRow> rows;
  for (const SupportSize& size : sizes) {
    EpisodeConfig c = config;
    c.support_size = size;
    rows.push_back({size, run_episode(split, c, labels)});
  }
  return rows;
}

ReportTable sweep_table(std::span<const SweepRow> rows, const std::string& column) {
  ReportTable t{"Settings", {column}, {4}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({"Simple CNAPS-" + r.support_size.label(), {r.report.accuracy}});
  }
  return t;
}

std::string render_episode(const EpisodeReport& report, const LabelCatalog& labels) {
  ReportTable t{"Class", {"Supports", "Queries", "Accuracy"}, {0, 0, 4}, {}};
  for (int c = 0; c < labels.size(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    t.rows.push_back({labels.display_name(c),
                      {static_cast<double>(report.supports_per_class.at(i)),
                       static_cast<double>(report.queries_per_class.at(i)),
                       report.per_class_accuracy.at(i)}});
  }
  t.rows.push_back({"Overall",
                    {std::nullopt, static_cast<double>(report.confusion.total()), report.accuracy}});
  return "support size: " + report.support_size.label() + "\n" + render_text(t);
}

FewShotRoutine::FewShotRoutine(std::shared_ptr<const Embedder> pretrained)
    : embedder_(std::move(pretrained)) {
  if (!embedder_) throw ConfigError("few-shot routine needs an embedder");
}

void FewShotRoutine::finetune(EmbeddingRefresh refresh) { refresh_ = std::move(refresh); }

Eigen::VectorXd FewShotRoutine::embed_one(const Image& slice) const {
  Eigen::VectorXd v = embedder_->embed(slice);
  return refresh_ ? refresh_(v) : v;
}

EmbeddingSplit FewShotRoutine::embed(std::span<const SliceSample> train,
                                     std::span<const SliceSample> validation) const {
  EmbeddingSplit out;
  for (const auto& s : train) out.train.push_back({s.class_id, embed_one(s.pixels)});
  for (const auto& s : validation) out.validation.push_back({s.class_id, embed_one(s.pixels)});
  return out;
}

EpisodeReport FewShotRoutine::query(std::span<const SliceSample> train,
                                    std::span<const SliceSample> validation,
                                    const EpisodeConfig& config, const LabelCatalog& labels) const {
  return run_episode(embed(train, validation), config, labels);
}

}  // namespace maskpipe
