#include "maskpipe/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>

#include "binary_io.hpp"
#include "maskpipe/errors.hpp"

namespace maskpipe {

Image crop(const Image& img, const PixelRect& r) {
  if (r.x0 < 0 || r.y0 < 0 || r.x1 > img.width || r.y1 > img.height || r.width() <= 0 ||
      r.height() <= 0) {
    throw InvalidGeometryError("crop rectangle [" + std::to_string(r.x0) + "," +
                               std::to_string(r.x1) + ")x[" + std::to_string(r.y0) + "," +
                               std::to_string(r.y1) + ") outside a " + std::to_string(img.width) +
                               "x" + std::to_string(img.height) + " image");
  }
  Image out(r.width(), r.height());
  const std::size_t row_bytes = static_cast<std::size_t>(r.width()) * 3;
  for (int y = 0; y < r.height(); ++y) {
    std::memcpy(out.at(0, y), img.at(r.x0, r.y0 + y), row_bytes);
  }
  return out;
}

std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

Image decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&] {
    skip_space();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) throw FormatError("PPM: header value too large");
    }
    if (pos == start) throw FormatError("PPM: malformed header at byte offset " + std::to_string(pos));
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError("PPM: bad magic at byte offset 0, expected P6");
  }
  pos = 2;
  const int w = number();
  const int h = number();
  const int maxval = number();
  if (maxval != 255) throw FormatError("PPM: only maxval 255 is supported");
  ++pos;  // single whitespace before the raster
  Image img(w, h);
  if (bytes.size() < pos + img.pixels.size()) {
    throw FormatError("PPM: truncated raster at byte offset " + std::to_string(bytes.size()));
  }
  std::memcpy(img.pixels.data(), bytes.data() + pos, img.pixels.size());
  return img;
}

namespace {

Image decode_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  const std::string bytes = detail::read_file(path);
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError("PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("PNG " + path.string() + ": " + image.message);
  }
  return out;
}

void encode_png(const std::filesystem::path& path, const Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("PNG write " + path.string() + ": " + image.message);
  }
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing image " + path.string());
  if (lower_extension(path) == ".png") return decode_png(path);
  return decode_ppm(detail::read_file(path));
}

void write_image(const std::filesystem::path& path, const Image& img, ImageFormat format) {
  if (format == ImageFormat::Png) {
    encode_png(path, img);
  } else {
    detail::write_file(path, encode_ppm(img));
  }
}

void write_image(const std::filesystem::path& path, const Image& img) {
  write_image(path, img, lower_extension(path) == ".png" ? ImageFormat::Png : ImageFormat::Ppm);
}

const char* extension(ImageFormat format) { return format == ImageFormat::Png ? ".png" : ".ppm"; }

}  // namespace maskpipe
