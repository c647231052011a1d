#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "maskpipe/config_text.hpp"
#include "maskpipe/dataset_voc.hpp"
#include "maskpipe/geometry.hpp"
#include "maskpipe/image.hpp"

namespace maskpipe {

enum class Transform : unsigned {
  Rotation = 1u << 0,
  Translation = 1u << 1,
  Scale = 1u << 2,
  Flip = 1u << 3,
  Hue = 1u << 4,
  Brightness = 1u << 5,
  Saturation = 1u << 6,
  Invert = 1u << 7,
  Blur = 1u << 8,
};

inline constexpr unsigned kAllTransforms = (1u << 9) - 1;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct AugmentationPlan {
  std::uint64_t seed = 0;
  unsigned enabled = kAllTransforms;
  Interval rotation_degrees{-15.0, 15.0};
  Interval translation_fraction{-0.1, 0.1};
  Interval scale{0.9, 1.1};
  Interval hue_degrees{-18.0, 18.0};
  Interval brightness{0.7, 1.5};
  Interval saturation{0.7, 1.5};
  Interval blur_sigma{0.0, 2.0};
  double flip_probability = 0.5;
  double invert_probability = 0.1;

  bool is_enabled(Transform t) const { return (enabled & static_cast<unsigned>(t)) != 0; }
  void set_enabled(Transform t, bool on);

  /// Throws ConfigError for an empty range, a probability outside [0, 1], or
  /// a range that admits a non-positive scale, brightness or saturation.
  void validate() const;

  friend bool operator==(const AugmentationPlan&, const AugmentationPlan&) = default;
};

struct AffineParams {
  double rotation_degrees = 0.0;
  double translate_x = 0.0;  // fraction of the image width
  double translate_y = 0.0;
  double scale = 1.0;
  bool flip = false;
};

struct ColorParams {
  double hue_degrees = 0.0;
  double brightness = 1.0;
  double saturation = 1.0;
  bool invert = false;
};

struct AugmentParams {
  AffineParams affine;
  ColorParams color;
  double blur_sigma = 0.0;
};

/// Image together with its boxes in normalized coordinates.
struct AnnotatedImage {
  Image image;
  std::vector<LabeledBox> boxes;
};

/// Rotation, scaling and translation about the image centre, resampled
/// bilinearly with black fill, followed by an optional horizontal mirror.
/// Boxes become the hull of their mapped corners, clipped to the image; boxes
/// left with no area are dropped. Throws InvalidGeometryError if scale <= 0.
AnnotatedImage affine(const AnnotatedImage& in, const AffineParams& p);

/// Hue rotation and saturation scaling in HSV, then brightness scaling with
/// clamping, then optional negation of every channel.
Image color(const Image& img, const ColorParams& p);

/// Normalized Gaussian taps for offsets -r..r with r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with mirrored borders (edge pixel repeated).
Image gaussian_blur(const Image& img, double sigma);

/// Parameters for item `index`. Every transform consumes its draws whether or
/// not it is enabled, so toggling one leaves the others unchanged. Disabled
/// transforms get neutral parameters.
AugmentParams draw_params(const AugmentationPlan& plan, std::uint64_t index);

AnnotatedImage apply_params(const AnnotatedImage& in, const AugmentParams& p);
AnnotatedImage apply_plan(const AnnotatedImage& in, const AugmentationPlan& plan,
                          std::uint64_t index);
SliceSample apply_plan(const SliceSample& in, const AugmentationPlan& plan, std::uint64_t index);

/// The plan as an [augment] config section.
std::string serialize_plan(const AugmentationPlan& plan);
AugmentationPlan plan_from_section(const ConfigSection& section);
/// Reads the [augment] section of `text`; defaults when there is none.
AugmentationPlan parse_plan(std::string_view text);

}  // namespace maskpipe
