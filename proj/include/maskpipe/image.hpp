#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maskpipe {

/// Interleaved 8-bit RGB, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  bool empty() const { return pixels.empty(); }
  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  std::uint8_t* at(int x, int y) { return pixels.data() + index(x, y); }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + index(x, y); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Integer pixel rectangle covering columns [x0, x1) and rows [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Copies `r` out of `img`; throws InvalidGeometryError if it is empty or
/// not inside the image.
Image crop(const Image& img, const PixelRect& r);

enum class ImageFormat { Ppm, Png };

/// Binary P6 PPM with maxval 255.
std::string encode_ppm(const Image& img);
Image decode_ppm(const std::string& bytes);

Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img, ImageFormat format);
/// Chooses the format from the extension (.png or .ppm).
void write_image(const std::filesystem::path& path, const Image& img);

const char* extension(ImageFormat format);

}  // namespace maskpipe
