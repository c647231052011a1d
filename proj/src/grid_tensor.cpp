#include "maskpipe/grid_tensor.hpp"

#include <cmath>

#include "binary_io.hpp"

namespace maskpipe {

namespace {
constexpr std::string_view kMagic = "MGRD";
}

GridTensor decode_grid_bytes(const std::string& bytes) {
  detail::ByteReader in(bytes, "grid tensor");
  in.expect_magic(kMagic);
  const auto side = in.get<std::uint32_t>();
  const auto boxes = in.get<std::uint32_t>();
  const auto classes = in.get<std::uint32_t>();
  if (side == 0 || boxes == 0 || side > 4096 || boxes > 64 || classes > 4096) {
    throw FormatError("grid tensor: implausible shape S=" + std::to_string(side) +
                      " B=" + std::to_string(boxes) + " C=" + std::to_string(classes));
  }
  GridTensor grid(static_cast<int>(side), static_cast<int>(boxes), static_cast<int>(classes));
  for (Eigen::Index i = 0; i < grid.values().size(); ++i) {
    grid.values()[i] = static_cast<double>(in.get<float>());
  }
  if (in.remaining() != 0) {
    throw FormatError("grid tensor: " + std::to_string(in.remaining()) +
                      " trailing bytes at offset " + std::to_string(in.position()));
  }
  return grid;
}

std::string encode_grid_bytes(const GridTensor& grid) {
  std::string out(kMagic);
  detail::put(out, static_cast<std::uint32_t>(grid.side()));
  detail::put(out, static_cast<std::uint32_t>(grid.boxes()));
  detail::put(out, static_cast<std::uint32_t>(grid.classes()));
  out.reserve(out.size() + static_cast<std::size_t>(grid.values().size()) * sizeof(float));
  for (Eigen::Index i = 0; i < grid.values().size(); ++i) {
    detail::put(out, static_cast<float>(grid.values()[i]));
  }
  return out;
}

GridTensor read_grid_file(const std::filesystem::path& path) {
  return decode_grid_bytes(detail::read_file(path));
}

void write_grid_file(const std::filesystem::path& path, const GridTensor& grid) {
  detail::write_file(path, encode_grid_bytes(grid));
}

}  // namespace maskpipe
