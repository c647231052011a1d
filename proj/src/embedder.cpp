#include "maskpipe/embedder.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"

namespace maskpipe {

namespace {

constexpr int kBins = 16;
constexpr int kPool = 4;

// Bounds of cell `i` out of `n` along an axis of `len` pixels; never empty.
std::pair<int, int> cell_span(int i, int n, int len) {
  int lo = static_cast<int>(static_cast<long>(i) * len / n);
  int hi = static_cast<int>(static_cast<long>(i + 1) * len / n);
  lo = std::min(lo, len - 1);
  hi = std::max(hi, lo + 1);
  return {lo, hi};
}

}  // namespace

Eigen::VectorXd BaselineEmbedder::embed(const Image& slice) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kDimension);
  if (slice.empty()) return out;
  const int w = slice.width;
  const int h = slice.height;
  const double n_pixels = static_cast<double>(w) * h;

  Eigen::MatrixXd gray(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* p = slice.at(x, y);
      for (int c = 0; c < 3; ++c) out[c * kBins + p[c] * kBins / 256] += 1.0 / n_pixels;
      gray(y, x) = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    }
  }

  Eigen::MatrixXd gx(h, w), gy(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gx(y, x) = 0.5 * (gray(y, std::min(x + 1, w - 1)) - gray(y, std::max(x - 1, 0)));
      gy(y, x) = 0.5 * (gray(std::min(y + 1, h - 1), x) - gray(std::max(y - 1, 0), x));
    }
  }
  const Eigen::MatrixXd mag = (gx.array().square() + gy.array().square()).sqrt().matrix();

  int index = 3 * kBins;
  const auto pool = [&](const Eigen::MatrixXd& m) {
    for (int cy = 0; cy < kPool; ++cy) {
      const auto [y0, y1] = cell_span(cy, kPool, h);
      for (int cx = 0; cx < kPool; ++cx) {
        const auto [x0, x1] = cell_span(cx, kPool, w);
        out[index++] = m.block(y0, x0, y1 - y0, x1 - x0).mean();
      }
    }
  };
  pool(gray);
  pool(mag);
  pool(gx.cwiseAbs());
  pool(gy.cwiseAbs());

  const double norm = out.norm();
  if (norm > 0.0) out /= norm;
  return out;
}

std::string encode_embeddings(std::span<const LabeledEmbedding> records) {
  const std::uint32_t d = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().vector.size());
  std::string out = "MEMB";
  detail::put(out, static_cast<std::uint32_t>(records.size()));
  detail::put(out, d);
  for (const auto& r : records) {
    if (static_cast<std::uint32_t>(r.vector.size()) != d) {
      throw DimensionError("embedding records must share one dimension");
    }
    detail::put(out, static_cast<std::uint32_t>(r.class_id));
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) detail::put(out, r.vector[i]);
  }
  return out;
}

std::vector<LabeledEmbedding> decode_embeddings(const std::string& bytes) {
  detail::ByteReader in(bytes, "embedding file");
  in.expect_magic("MEMB");
  const auto count = in.get<std::uint32_t>();
  const auto d = in.get<std::uint32_t>();
  const std::size_t need = static_cast<std::size_t>(count) * (4 + 8 * static_cast<std::size_t>(d));
  if (in.remaining() < need) {
    throw FormatError("embedding file: truncated at byte offset " + std::to_string(bytes.size()) +
                      ", header promises " + std::to_string(count) + " records");
  }
  std::vector<LabeledEmbedding> out(count);
  for (auto& r : out) {
    r.class_id = static_cast<int>(in.get<std::uint32_t>());
    r.vector.resize(d);
    for (std::uint32_t i = 0; i < d; ++i) r.vector[i] = in.get<double>();
  }
  if (in.remaining() != 0) {
    throw FormatError("embedding file: trailing bytes at offset " + std::to_string(in.position()));
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, std::span<const LabeledEmbedding> records) {
  detail::write_file(path, encode_embeddings(records));
}

std::vector<LabeledEmbedding> read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(detail::read_file(path));
}

}  // namespace maskpipe
