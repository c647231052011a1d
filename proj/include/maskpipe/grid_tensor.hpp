#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <string>

namespace maskpipe {

/// Raw backbone output: an S x S grid, B boxes per cell, each box carrying
/// (tx, ty, tw, th, objectness logit, C class logits). Stored flat, row-major
/// over (row, col, box, channel).
template <typename Scalar>
class BasicGridTensor {
 public:
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr int kTx = 0;
  static constexpr int kTy = 1;
  static constexpr int kTw = 2;
  static constexpr int kTh = 3;
  static constexpr int kObjectness = 4;
  static constexpr int kFirstClass = 5;

  BasicGridTensor() = default;
  BasicGridTensor(int side, int boxes, int classes)
      : side_(side), boxes_(boxes), classes_(classes),
        values_(Values::Zero(static_cast<Eigen::Index>(side) * side * boxes * (5 + classes))) {}

  int side() const { return side_; }
  int boxes() const { return boxes_; }
  int classes() const { return classes_; }
  int channels() const { return 5 + classes_; }
  int slots() const { return side_ * side_ * boxes_; }

  Eigen::Index offset(int row, int col, int box, int channel = 0) const {
    return ((static_cast<Eigen::Index>(row) * side_ + col) * boxes_ + box) * channels() + channel;
  }
  Eigen::Index slot_offset(int slot) const {
    return static_cast<Eigen::Index>(slot) * channels();
  }

  Scalar& operator()(int row, int col, int box, int channel) {
    return values_[offset(row, col, box, channel)];
  }
  const Scalar& operator()(int row, int col, int box, int channel) const {
    return values_[offset(row, col, box, channel)];
  }

  /// The (5 + C) channels of one box slot.
  auto slot(int index) { return values_.segment(slot_offset(index), channels()); }
  auto slot(int index) const { return values_.segment(slot_offset(index), channels()); }

  Values& values() { return values_; }
  const Values& values() const { return values_; }

  bool same_shape(const BasicGridTensor& other) const {
    return side_ == other.side_ && boxes_ == other.boxes_ && classes_ == other.classes_;
  }

 private:
  int side_ = 0;
  int boxes_ = 0;
  int classes_ = 0;
  Values values_;
};

using GridTensor = BasicGridTensor<double>;

/// MGRD tensor file: "MGRD", u32 LE S, B, C, then S*S*B*(5+C) LE float32.
GridTensor read_grid_file(const std::filesystem::path& path);
void write_grid_file(const std::filesystem::path& path, const GridTensor& grid);
GridTensor decode_grid_bytes(const std::string& bytes);
std::string encode_grid_bytes(const GridTensor& grid);

}  // namespace maskpipe
