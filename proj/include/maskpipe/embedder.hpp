#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "maskpipe/image.hpp"

namespace maskpipe {

/// Deterministic map from an image slice to a feature vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Eigen::VectorXd embed(const Image& slice) const = 0;
  virtual int dimension() const = 0;
};

/// Hand-crafted features, L2-normalised, d = 112:
///   48  16-bin histograms of R, G and B
///   16  4x4 mean-pooled grayscale
///   16  4x4 mean-pooled gradient magnitude
///   32  4x4 mean-pooled |d/dx| and |d/dy|
class BaselineEmbedder final : public Embedder {
 public:
  static constexpr int kDimension = 112;

  Eigen::VectorXd embed(const Image& slice) const override;
  int dimension() const override { return kDimension; }
};

struct LabeledEmbedding {
  int class_id = 0;
  Eigen::VectorXd vector;
};

/// MEMB exchange file: "MEMB", u32 count, u32 d, then per record u32 class id
/// followed by d little-endian float64 values.
std::string encode_embeddings(std::span<const LabeledEmbedding> records);
std::vector<LabeledEmbedding> decode_embeddings(const std::string& bytes);
void write_embeddings(const std::filesystem::path& path, std::span<const LabeledEmbedding> records);
std::vector<LabeledEmbedding> read_embeddings(const std::filesystem::path& path);

}  // namespace maskpipe
