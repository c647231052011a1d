#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskpipe/geometry.hpp"
#include "maskpipe/image.hpp"

namespace maskpipe {

using Rgb = std::array<std::uint8_t, 3>;

/// Class 0 green, 1 red, 2 amber; higher ids wrap around.
Rgb class_color(int class_id);

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kTagHeight = kGlyphHeight + 2;
inline constexpr int kBoxThickness = 2;

/// Rows of a 5x7 glyph, most significant of the low five bits leftmost.
/// Lowercase letters use the uppercase shapes; unknown characters draw '?'.
const std::array<std::uint8_t, kGlyphHeight>& glyph(char c);

/// Draws `text` with its top-left at (x, y); pixels outside are skipped.
void draw_text(Image& img, int x, int y, std::string_view text, const Rgb& color);

/// "<name> <confidence to two decimals>".
std::string tag_text(const Detection& det, std::span<const std::string> labels);

/// Pixel rectangle [x0, x1) x [y0, y1) covering `box`, clipped to the image.
PixelRect box_pixels(const BBox& box, int width, int height);

/// Returns a copy of `frame` with a 2-pixel outline per detection in its
/// class colour and a filled tag above the box (inside it when there is no
/// room above) holding tag_text in black. The input is never modified.
Image draw_annotations(const Image& frame, std::span<const Detection> dets,
                       std::span<const std::string> labels);

}  // namespace maskpipe
