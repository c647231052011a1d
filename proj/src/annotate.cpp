#include "maskpipe/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace maskpipe {
namespace {

using Glyph = std::array<std::uint8_t, kGlyphHeight>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> glyphs{
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
      {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
      {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
      {'#', {0x0A, 0x0A, 0x1F, 0x0A, 0x1F, 0x0A, 0x0A}},
  };
  return glyphs;
}

void put(Image& img, int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  std::copy(c.begin(), c.end(), img.at(x, y));
}

void fill(Image& img, int x0, int y0, int x1, int y1, const Rgb& c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width);
  y1 = std::min(y1, img.height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) std::copy(c.begin(), c.end(), img.at(x, y));
  }
}

}  // namespace

Rgb class_color(int class_id) {
  static constexpr Rgb palette[3] = {{0, 255, 0}, {255, 0, 0}, {255, 191, 0}};
  const int k = ((class_id % 3) + 3) % 3;
  return palette[k];
}

const std::array<std::uint8_t, kGlyphHeight>& glyph(char c) {
  const auto& f = font();
  const auto it = f.find(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return it != f.end() ? it->second : f.at('?');
}

void draw_text(Image& img, int x, int y, std::string_view text, const Rgb& color) {
  for (char ch : text) {
    const auto& g = glyph(ch);
    for (int row = 0; row < kGlyphHeight; ++row) {
      for (int col = 0; col < kGlyphWidth; ++col) {
        if (g[static_cast<std::size_t>(row)] & (1u << (kGlyphWidth - 1 - col))) {
          put(img, x + col, y + row, color);
        }
      }
    }
    x += kGlyphWidth + 1;
  }
}

std::string tag_text(const Detection& det, std::span<const std::string> labels) {
  std::string name = det.class_id >= 0 && static_cast<std::size_t>(det.class_id) < labels.size()
                         ? labels[static_cast<std::size_t>(det.class_id)]
                         : "class " + std::to_string(det.class_id);
  char conf[32];
  std::snprintf(conf, sizeof conf, "%.2f", det.confidence);
  return name + " " + conf;
}

PixelRect box_pixels(const BBox& box, int width, int height) {
  const auto lo = [](double v, int n) {
    return std::clamp(static_cast<int>(std::floor(v * n)), 0, n);
  };
  const auto hi = [](double v, int n) {
    return std::clamp(static_cast<int>(std::ceil(v * n)), 0, n);
  };
  return {lo(box.x1, width), lo(box.y1, height), hi(box.x2, width), hi(box.y2, height)};
}

Image draw_annotations(const Image& frame, std::span<const Detection> dets,
                       std::span<const std::string> labels) {
  Image out = frame;
  for (const auto& d : dets) {
    const Rgb color = class_color(d.class_id);
    const PixelRect r = box_pixels(d.box, out.width, out.height);
    if (r.width() <= 0 || r.height() <= 0) continue;
    const int t = kBoxThickness;
    fill(out, r.x0, r.y0, r.x1, std::min(r.y0 + t, r.y1), color);
    fill(out, r.x0, std::max(r.y1 - t, r.y0), r.x1, r.y1, color);
    fill(out, r.x0, r.y0, std::min(r.x0 + t, r.x1), r.y1, color);
    fill(out, std::max(r.x1 - t, r.x0), r.y0, r.x1, r.y1, color);

    const std::string text = tag_text(d, labels);
    const int tag_w = static_cast<int>(text.size()) * (kGlyphWidth + 1) + 1;
    const int tag_y = r.y0 >= kTagHeight ? r.y0 - kTagHeight : r.y0;
    fill(out, r.x0, tag_y, r.x0 + tag_w, tag_y + kTagHeight, color);
    draw_text(out, r.x0 + 1, tag_y + 1, text, {0, 0, 0});
  }
  return out;
}

}  // namespace maskpipe
